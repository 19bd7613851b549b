#include "climsom/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "climsom/codec.hpp"
#include "climsom/error.hpp"

namespace climsom {

namespace fs = std::filesystem;
using nlohmann::json;

std::string MemberId::key() const { return gcm + ":" + ssp + ":" + variant; }

SpatialGrid SpatialGrid::from_mask(int rows, int cols, std::vector<double> lats,
                                   std::vector<double> lons, std::vector<bool> const& valid) {
  if (rows <= 0 || cols <= 0) {
    fail(ErrorKind::kDataError, "grid shape must be positive");
  }
  if (lats.size() != static_cast<std::size_t>(rows) ||
      lons.size() != static_cast<std::size_t>(cols)) {
    fail(ErrorKind::kDataError, "grid axis length does not match shape");
  }
  if (valid.size() != static_cast<std::size_t>(rows) * cols) {
    fail(ErrorKind::kDataError, "valid mask size does not match shape");
  }
  SpatialGrid grid;
  grid.rows = rows;
  grid.cols = cols;
  grid.lats = std::move(lats);
  grid.lons = std::move(lons);
  grid.raster_to_cell.assign(valid.size(), -1);
  for (std::size_t r = 0; r < valid.size(); ++r) {
    if (valid[r]) {
      grid.raster_to_cell[r] = static_cast<int>(grid.cell_to_raster.size());
      grid.cell_to_raster.push_back(static_cast<int>(r));
    }
  }
  return grid;
}

std::vector<bool> SpatialGrid::valid_mask() const {
  std::vector<bool> mask(raster_to_cell.size());
  for (std::size_t r = 0; r < mask.size(); ++r) {
    mask[r] = raster_to_cell[r] >= 0;
  }
  return mask;
}

std::vector<int> TimeAxis::years() const {
  std::vector<int> out(months.size());
  int year = start_year;
  for (std::size_t t = 0; t < months.size(); ++t) {
    if (t > 0 && months[t] <= months[t - 1]) {
      ++year;
    }
    out[t] = year;
  }
  return out;
}

std::size_t EnsembleDataset::member_index(std::string const& key) const {
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (members[i].key() == key) {
      return i;
    }
  }
  fail(ErrorKind::kNotFound, "unknown member " + key);
}

void EnsembleDataset::validate() const {
  if (values.size() != members.size()) {
    fail(ErrorKind::kDataError, "member count does not match value arrays");
  }
  for (int m : time.months) {
    if (m < 1 || m > 12) {
      fail(ErrorKind::kDataError, "invalid month in time axis");
    }
  }
  auto const expected = time_len() * num_cells();
  for (auto const& v : values) {
    if (v.size() != expected) {
      fail(ErrorKind::kDataError, "member array length mismatch");
    }
    if (!std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); })) {
      fail(ErrorKind::kDataError, "non-finite value encountered");
    }
  }
}

MonthFilter MonthFilter::all() {
  MonthFilter f;
  std::fill(f.bits_.begin() + 1, f.bits_.end(), true);
  return f;
}

MonthFilter MonthFilter::of(std::span<int const> months) {
  MonthFilter f;
  for (int m : months) {
    if (m < 1 || m > 12) {
      invalid("invalid month " + std::to_string(m));
    }
    f.bits_[m] = true;
  }
  return f;
}

MonthFilter MonthFilter::parse(std::string const& text) {
  if (text == "all") {
    return all();
  }
  MonthFilter f;
  std::stringstream ss(text);
  std::string part;
  auto to_month = [](std::string const& s) {
    std::size_t used = 0;
    int m = 0;
    try {
      m = std::stoi(s, &used);
    } catch (std::exception const&) {
      invalid("invalid month '" + s + "'");
    }
    if (used != s.size() || m < 1 || m > 12) {
      invalid("invalid month '" + s + "'");
    }
    return m;
  };
  while (std::getline(ss, part, ',')) {
    if (part.empty()) {
      continue;
    }
    if (auto dash = part.find('-'); dash != std::string::npos) {
      int const from = to_month(part.substr(0, dash));
      int const to = to_month(part.substr(dash + 1));
      for (int m = from;; m = m % 12 + 1) {
        f.bits_[m] = true;
        if (m == to) {
          break;
        }
      }
    } else {
      f.bits_[to_month(part)] = true;
    }
  }
  if (f.empty()) {
    invalid("empty month filter");
  }
  return f;
}

bool MonthFilter::empty() const {
  return std::none_of(bits_.begin() + 1, bits_.end(), [](bool b) { return b; });
}

std::vector<int> MonthFilter::months() const {
  std::vector<int> out;
  for (int m = 1; m <= 12; ++m) {
    if (bits_[m]) out.push_back(m);
  }
  return out;
}

std::string MonthFilter::to_string() const {
  std::string out;
  for (int m : months()) {
    if (!out.empty()) out += ',';
    out += std::to_string(m);
  }
  return out;
}

EnsembleDataset load_ensemble(fs::path const& dir) {
  auto const manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    fail(ErrorKind::kNotFound, "missing manifest: " + manifest_path.string());
  }
  json manifest;
  try {
    manifest = json::parse(codec::read_file(manifest_path));
  } catch (json::exception const& e) {
    fail(ErrorKind::kDataError, std::string("malformed manifest: ") + e.what());
  }

  EnsembleDataset ds;
  try {
    auto const& g = manifest.at("grid");
    int const rows = g.at("rows").get<int>();
    int const cols = g.at("cols").get<int>();
    auto const bytes = codec::base64_decode(g.at("valid_mask").get<std::string>());
    std::vector<bool> valid(static_cast<std::size_t>(rows) * cols);
    if (bytes.size() * 8 < valid.size()) {
      fail(ErrorKind::kDataError, "valid mask too short");
    }
    for (std::size_t r = 0; r < valid.size(); ++r) {
      valid[r] = (bytes[r / 8] >> (r % 8)) & 1;
    }
    ds.grid = SpatialGrid::from_mask(rows, cols, g.at("lats").get<std::vector<double>>(),
                                     g.at("lons").get<std::vector<double>>(), valid);
    ds.time.start_year = manifest.at("time").at("start_year").get<int>();
    ds.time.months = manifest.at("time").at("months").get<std::vector<int>>();
    ds.normalized = manifest.value("normalized", false);

    auto const expected = ds.time_len() * ds.num_cells();
    for (auto const& m : manifest.at("members")) {
      ds.members.push_back({m.at("gcm").get<std::string>(), m.at("ssp").get<std::string>(),
                            m.at("variant").get<std::string>()});
      auto values = codec::parse_f32le(codec::read_file(dir / m.at("file").get<std::string>()));
      if (values.size() != expected) {
        fail(ErrorKind::kDataError, "member array length mismatch for " + ds.members.back().key());
      }
      ds.values.push_back(std::move(values));
    }
  } catch (json::exception const& e) {
    fail(ErrorKind::kDataError, std::string("malformed manifest: ") + e.what());
  }
  ds.validate();
  return ds;
}

void save_ensemble(EnsembleDataset const& dataset, fs::path const& dir) {
  dataset.validate();
  fs::create_directories(dir);
  auto const mask = dataset.grid.valid_mask();
  std::vector<std::uint8_t> bits((mask.size() + 7) / 8, 0);
  for (std::size_t r = 0; r < mask.size(); ++r) {
    if (mask[r]) bits[r / 8] |= static_cast<std::uint8_t>(1u << (r % 8));
  }
  json manifest;
  manifest["grid"] = {{"rows", dataset.grid.rows},
                      {"cols", dataset.grid.cols},
                      {"lats", dataset.grid.lats},
                      {"lons", dataset.grid.lons},
                      {"valid_mask", codec::base64_encode(bits)}};
  manifest["time"] = {{"start_year", dataset.time.start_year}, {"months", dataset.time.months}};
  manifest["normalized"] = dataset.normalized;
  manifest["members"] = json::array();
  for (std::size_t i = 0; i < dataset.members.size(); ++i) {
    auto const& m = dataset.members[i];
    auto const file = "member_" + std::to_string(i) + ".f32";
    manifest["members"].push_back(
        {{"gcm", m.gcm}, {"ssp", m.ssp}, {"variant", m.variant}, {"file", file}});
    std::string blob;
    codec::append_f32le(blob, dataset.values[i]);
    codec::write_file(dir / file, blob);
  }
  codec::write_file(dir / "manifest.json", manifest.dump(2));
}

std::array<double, 13> pooled_month_std(EnsembleDataset const& dataset) {
  std::array<double, 13> sum{}, count{}, sq{}, out{};
  auto const cells = dataset.num_cells();
  for (std::size_t m = 0; m < dataset.members.size(); ++m) {
    for (std::size_t t = 0; t < dataset.time_len(); ++t) {
      int const month = dataset.time.months[t];
      for (float v : dataset.step(m, t)) sum[month] += v;
      count[month] += static_cast<double>(cells);
    }
  }
  std::array<double, 13> mean{};
  for (int k = 1; k <= 12; ++k) {
    mean[k] = count[k] > 0 ? sum[k] / count[k] : 0.0;
  }
  for (std::size_t m = 0; m < dataset.members.size(); ++m) {
    for (std::size_t t = 0; t < dataset.time_len(); ++t) {
      int const month = dataset.time.months[t];
      for (float v : dataset.step(m, t)) {
        double const d = v - mean[month];
        sq[month] += d * d;
      }
    }
  }
  for (int k = 1; k <= 12; ++k) {
    out[k] = count[k] > 0 ? std::sqrt(sq[k] / count[k]) : 0.0;
  }
  return out;
}

EnsembleDataset normalize_per_month(EnsembleDataset dataset) {
  if (dataset.normalized) {
    invalid("dataset is already normalized");
  }
  auto const sd = pooled_month_std(dataset);
  std::array<bool, 13> present{};
  for (int m : dataset.time.months) present[m] = true;
  for (int k = 1; k <= 12; ++k) {
    if (present[k] && !(sd[k] > 0.0)) {
      fail(ErrorKind::kDataError,
           "zero pooled standard deviation for month " + std::to_string(k));
    }
  }
  auto const cells = dataset.num_cells();
  for (auto& v : dataset.values) {
    for (std::size_t t = 0; t < dataset.time_len(); ++t) {
      double const s = sd[dataset.time.months[t]];
      for (std::size_t c = 0; c < cells; ++c) {
        auto& x = v[t * cells + c];
        x = static_cast<float>(x / s);
      }
    }
  }
  dataset.normalized = true;
  return dataset;
}

SampleMatrix flatten_samples(EnsembleDataset const& dataset, MonthFilter const& months) {
  if (months.empty()) {
    invalid("empty month filter");
  }
  if (!dataset.normalized) {
    invalid("dataset must be normalized before flattening");
  }
  auto const years = dataset.time.years();
  SampleMatrix out;
  out.dim = dataset.num_cells();
  for (std::size_t m = 0; m < dataset.members.size(); ++m) {
    for (std::size_t t = 0; t < dataset.time_len(); ++t) {
      int const month = dataset.time.months[t];
      if (!months.contains(month)) {
        continue;
      }
      auto const row = dataset.step(m, t);
      out.data.insert(out.data.end(), row.begin(), row.end());
      out.refs.push_back({static_cast<std::int32_t>(m), static_cast<std::int32_t>(t), years[t],
                          month});
    }
  }
  out.rows = out.refs.size();
  return out;
}

double spatial_mean(std::span<float const> values) {
  if (values.empty()) {
    return 0.0;
  }
  double s = 0.0;
  for (float v : values) s += v;
  return s / static_cast<double>(values.size());
}

}  // namespace climsom
