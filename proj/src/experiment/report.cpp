#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lunet/csv.hpp"
#include "lunet/error.hpp"
#include "lunet/experiment.hpp"

namespace lunet::experiment {

namespace {

constexpr const char* kSummaryHeader = "name,kind,family,n_f,n_f_initial,n_ch,n_p,dice_median,dice_mad,seeds";

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

// Counts UTF-8 lead bytes only.
std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

std::string pad(const std::string& s, std::size_t width, bool right) {
  const std::size_t shown = display_width(s);
  if (shown >= width) return s;
  const std::string fill(width - shown, ' ');
  return right ? fill + s : s + fill;
}

}  // namespace

std::string format_dice(double median, double mad, bool upper_bound) {
  return std::string(upper_bound ? "≤" : "") + fixed3(median) + " ± " + fixed3(mad);
}

void write_summary(const fs::path& path, const SummaryRow& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << kSummaryHeader << "\n"
      << r.name << "," << r.kind << "," << r.family << "," << r.n_f << "," << r.n_f_initial << "," << r.n_ch << ","
      << r.n_p << "," << fmt_double(r.dice_median) << "," << fmt_double(r.dice_mad) << "," << r.seeds << "\n";
}

SummaryRow read_summary(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string header, line;
  std::getline(in, header);
  if (header != kSummaryHeader) throw FormatError(path.string() + ": unexpected summary header");
  if (!std::getline(in, line)) throw FormatError(path.string() + ": summary row missing");
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) f.push_back(item);
  if (f.size() != 10) throw FormatError(path.string() + ": summary row has " + std::to_string(f.size()) + " fields");
  try {
    SummaryRow r;
    r.name = f[0];
    r.kind = f[1];
    r.family = f[2];
    r.n_f = std::stoi(f[3]);
    r.n_f_initial = std::stoi(f[4]);
    r.n_ch = std::stoll(f[5]);
    r.n_p = std::stoll(f[6]);
    r.dice_median = std::stod(f[7]);
    r.dice_mad = std::stod(f[8]);
    r.seeds = std::stoi(f[9]);
    if (r.kind != "fixed" && r.kind != "pruning") throw FormatError(path.string() + ": unknown kind " + r.kind);
    return r;
  } catch (const std::logic_error&) {
    throw FormatError(path.string() + ": malformed summary row");
  }
}

std::string cmd_report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("report directory does not exist: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() == "summary.csv") files.push_back(e.path());
  if (files.empty()) throw Error("no summary.csv found under " + dir.string());
  std::sort(files.begin(), files.end());

  std::vector<SummaryRow> rows;
  for (const auto& f : files) rows.push_back(read_summary(f));
  std::stable_sort(rows.begin(), rows.end(), [](const SummaryRow& a, const SummaryRow& b) {
    if (a.n_p != b.n_p) return a.n_p > b.n_p;
    return a.name < b.name;
  });

  std::vector<std::vector<std::string>> cells{{"Model", "Kind", "N_ch", "N_p", "N_f", "Dice"}};
  for (const auto& r : rows) {
    const bool pruned = r.kind == "pruning";
    std::string nf = std::to_string(r.n_f);
    if (pruned) nf += " (" + std::to_string(r.n_f_initial) + ")";
    cells.push_back({r.name, r.kind, std::to_string(r.n_ch), std::to_string(r.n_p), nf,
                     format_dice(r.dice_median, r.dice_mad, pruned)});
  }
  std::vector<std::size_t> width(cells.front().size(), 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], display_width(row[c]));
  std::ostringstream os;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      const bool numeric = c >= 2 && c <= 4;
      const bool last = c + 1 == row.size();
      os << (c ? "  " : "") << (last ? row[c] : pad(row[c], width[c], numeric));
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace lunet::experiment
