#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "evnet/panel.hpp"

namespace evnet::testing {

inline std::filesystem::path data_dir() { return EVNET_TEST_DATA_DIR; }

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline PanelRecord record(std::string zip, int year, double sales, double stock, double stations,
                          double parking = 50.0) {
  PanelRecord r;
  r.zip = std::move(zip);
  r.year = year;
  r.ev_sales = sales;
  r.ev_stock = stock;
  r.station_stock = stations;
  r.avg_ev_price = 45000.0;
  r.median_income = 90000.0;
  r.white_pop = 20000.0;
  r.asian_pop = 5000.0;
  r.oil_price = 4.0;
  r.parking_lots = parking;
  r.rebate_pct = 0.3;
  return r;
}

// 2 zips x 3 years with distinct stock/station ratios.
inline std::vector<PanelRecord> small_records() {
  return {
      record("90001", 2020, 10, 100, 10, 40), record("90001", 2021, 20, 115, 14, 40),
      record("90001", 2022, 30, 140, 20, 40), record("90002", 2020, 5, 60, 30, 70),
      record("90002", 2021, 9, 66, 33, 70),   record("90002", 2022, 12, 75, 37, 70),
  };
}

inline std::string to_csv(const std::vector<PanelRecord>& records) {
  std::ostringstream out;
  write_panel_csv(out, records, 0);
  return out.str();
}

}  // namespace evnet::testing
