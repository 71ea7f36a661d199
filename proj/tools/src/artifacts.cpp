#include "artifacts.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mfegan/errors.hpp"

namespace mfegan::cli {

namespace {

std::string fixed(double v, const char* fmt) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

}  // namespace

std::string fixed6(double v) { return fixed(v, "%.6f"); }
std::string fixed3(double v) { return fixed(v, "%.3f"); }
std::string fixed2(double v) { return fixed(v, "%.2f"); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("cannot open " + path.string() + " for writing");
  }
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw FormatError("failed writing " + path.string());
}

std::string trace_csv(Variant variant, const TrainTrace& trace) {
  std::string out;
  switch (variant) {
    case Variant::Cnn:
      out = "epoch,batch,loss_c\n";
      for (const TraceRow& r : trace.rows) {
        out += std::to_string(r.epoch) + "," + std::to_string(r.batch) + "," +
               fixed6(r.loss_c) + "\n";
      }
      break;
    case Variant::Acgan:
      out = "epoch,batch,loss_s,loss_c,loss_d,loss_g\n";
      for (const TraceRow& r : trace.rows) {
        out += std::to_string(r.epoch) + "," + std::to_string(r.batch) + "," +
               fixed6(r.loss_s) + "," + fixed6(r.loss_c) + "," +
               fixed6(r.loss_d) + "," + fixed6(r.loss_g) + "\n";
      }
      break;
    case Variant::Mfegan:
      out =
          "epoch,batch,loss_s,loss_c,loss_d,"
          "fq_minmax,fq_heuristic,fq_leastsquare,"
          "fd_minmax,fd_heuristic,fd_leastsquare,"
          "fm_minmax,fm_heuristic,fm_leastsquare,survivor\n";
      for (const TraceRow& r : trace.rows) {
        out += std::to_string(r.epoch) + "," + std::to_string(r.batch) + "," +
               fixed6(r.loss_s) + "," + fixed6(r.loss_c) + "," +
               fixed6(r.loss_d);
        for (const auto& triple : {r.fq, r.fd, r.fm}) {
          for (int k = 0; k < 3; ++k) out += "," + fixed6(triple[k]);
        }
        out += ",";
        out += r.survivor < 0 ? "none"
                              : mutation_name(kAllMutations[static_cast<
                                    std::size_t>(r.survivor)]);
        out += "\n";
      }
      break;
  }
  return out;
}

std::string timing_csv(const TrainTrace& trace) {
  std::string out = "epoch,seconds\n";
  for (std::size_t e = 0; e < trace.epoch_seconds.size(); ++e) {
    out += std::to_string(e + 1) + "," + fixed6(trace.epoch_seconds[e]) + "\n";
  }
  return out;
}

std::string report_csv(const std::vector<double>& per_class, double oa,
                       double aa, double kappa, double time_epoch_sec) {
  std::string out = "metric,value\n";
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    out += "class_" + std::to_string(c + 1) + "," +
           fixed2(per_class[c] * 100.0) + "\n";
  }
  out += "oa," + fixed2(oa * 100.0) + "\n";
  out += "aa," + fixed2(aa * 100.0) + "\n";
  out += "kappa," + fixed2(kappa * 100.0) + "\n";
  out += "time_epoch_sec," + fixed6(time_epoch_sec) + "\n";
  return out;
}

std::string predictions_csv(const Predictions& p) {
  std::string out = "index,truth,pred\n";
  for (std::size_t i = 0; i < p.index.size(); ++i) {
    out += std::to_string(p.index[i]) + "," + std::to_string(p.truth[i]) +
           "," + std::to_string(p.pred[i]) + "\n";
  }
  return out;
}

namespace {

long long parse_field(const std::string& field, const std::string& where) {
  long long v = 0;
  const auto r =
      std::from_chars(field.data(), field.data() + field.size(), v);
  if (r.ec != std::errc{} || r.ptr != field.data() + field.size()) {
    throw FormatError(where + ": expected an integer, got '" + field + "'");
  }
  return v;
}

}  // namespace

Predictions read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open prediction file " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      (line != "index,truth,pred" && line != "index,truth,pred\r")) {
    throw FormatError(path.string() + ": missing index,truth,pred header");
  }
  Predictions p;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    std::istringstream row(line);
    std::string a, b, c, extra;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') ||
        !std::getline(row, c, ',')) {
      throw FormatError(where + ": expected index,truth,pred");
    }
    if (std::getline(row, extra, ',')) {
      throw FormatError(where + ": too many fields");
    }
    p.index.push_back(static_cast<std::uint32_t>(parse_field(a, where)));
    p.truth.push_back(static_cast<int>(parse_field(b, where)));
    p.pred.push_back(static_cast<int>(parse_field(c, where)));
  }
  if (p.index.empty()) {
    throw FormatError(path.string() + ": no prediction rows");
  }
  return p;
}

std::vector<int> classify_all(Discriminator& d, const PatchSet& set) {
  constexpr std::size_t kChunk = 256;
  std::vector<int> out;
  out.reserve(set.count());
  std::vector<std::uint32_t> idx;
  for (std::size_t start = 0; start < set.count(); start += kChunk) {
    const std::size_t n = std::min(kChunk, set.count() - start);
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), static_cast<std::uint32_t>(start));
    const Tensor x = patch_batch(set, idx);
    const std::vector<int> labels = classify(d, x);
    out.insert(out.end(), labels.begin(), labels.end());
  }
  return out;
}

double mean_epoch_seconds(const std::filesystem::path& timing_path) {
  std::ifstream in(timing_path, std::ios::binary);
  if (!in) return 0.0;
  std::string line;
  std::getline(in, line);  // header
  double sum = 0.0;
  int count = 0;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    try {
      sum += std::stod(line.substr(comma + 1));
      ++count;
    } catch (const std::exception&) {
      throw FormatError(timing_path.string() + ": malformed seconds value");
    }
  }
  return count > 0 ? sum / count : 0.0;
}

}  // namespace mfegan::cli
