#include "tfcgc/io.hpp"

#include "tfcgc/error.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace tfcgc {

namespace {

std::vector<std::string> split(const std::string &line, char sep = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep))
    out.push_back(cell);
  if (!line.empty() && line.back() == sep)
    out.emplace_back();
  return out;
}

std::string strip(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parse_index(const std::string &text, const std::string &what) {
  const double v = parse_number(text, what);
  require(v >= 0.0 && v == static_cast<double>(static_cast<long long>(v)),
          ErrorKind::InvalidArgument, what + " must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

std::ifstream open_input(const std::string &path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open " + path);
  return in;
}

} // namespace

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_number(const std::string &text, const std::string &what) {
  const std::string s = strip(text);
  require(!s.empty(), ErrorKind::InvalidArgument, "empty " + what);
  char *end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  require(end == s.c_str() + s.size() && errno != ERANGE,
          ErrorKind::InvalidArgument, "malformed " + what + ": " + s);
  return v;
}

std::ofstream open_output(const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::Io, "cannot write " + path);
  return out;
}

TrialSet parse_trials_csv(std::istream &in, double sampling_rate) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::InvalidArgument,
          "empty CSV");
  const auto header = split(strip(line));
  require(header.size() >= 3 && strip(header[0]) == "trial" &&
              strip(header[1]) == "t",
          ErrorKind::InvalidArgument,
          "CSV header must start with trial,t and name at least one channel");
  TrialSet data;
  data.sampling_rate = sampling_rate;
  for (std::size_t c = 2; c < header.size(); ++c) {
    const std::string name = strip(header[c]);
    require(!name.empty(), ErrorKind::InvalidArgument, "empty channel name");
    for (const auto &seen : data.channels)
      require(seen != name, ErrorKind::InvalidArgument,
              "duplicate channel " + name);
    data.channels.push_back(name);
  }
  const std::size_t nc = data.channels.size();

  std::map<std::size_t, std::map<std::size_t, std::vector<double>>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip(line).empty())
      continue;
    const auto cells = split(strip(line));
    const std::string where = " on line " + std::to_string(line_no);
    require(cells.size() == nc + 2, ErrorKind::InvalidArgument,
            "wrong number of fields" + where);
    const std::size_t trial = parse_index(cells[0], "trial id" + where);
    const std::size_t t = parse_index(cells[1], "sample index" + where);
    require(t >= 1, ErrorKind::InvalidArgument, "sample index starts at 1" + where);
    std::vector<double> v(nc);
    for (std::size_t c = 0; c < nc; ++c)
      v[c] = parse_number(cells[c + 2], "value" + where);
    const bool fresh = rows[trial].emplace(t, std::move(v)).second;
    require(fresh, ErrorKind::InvalidArgument,
            "duplicate sample " + std::to_string(t) + " in trial " +
                std::to_string(trial));
  }
  require(!rows.empty(), ErrorKind::InvalidArgument, "CSV holds no samples");

  for (const auto &[id, samples] : rows) {
    const std::size_t n = samples.size();
    require(samples.rbegin()->first == n, ErrorKind::InvalidArgument,
            "trial " + std::to_string(id) + " is missing samples");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(nc));
    for (const auto &[t, v] : samples)
      for (std::size_t c = 0; c < nc; ++c)
        m(static_cast<Eigen::Index>(t - 1), static_cast<Eigen::Index>(c)) = v[c];
    data.trials.push_back(std::move(m));
  }
  data.validate();
  return data;
}

TrialSet read_trials_csv(const std::string &path, double sampling_rate) {
  auto in = open_input(path);
  return parse_trials_csv(in, sampling_rate);
}

void write_trials_csv(std::ostream &out, const TrialSet &data) {
  out << "trial,t";
  for (const auto &c : data.channels)
    out << ',' << c;
  out << '\n';
  for (std::size_t b = 0; b < data.trials.size(); ++b) {
    const auto &m = data.trials[b];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      out << (b + 1) << ',' << (r + 1);
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        out << ',' << format_number(m(r, c));
      out << '\n';
    }
  }
}

void write_trials_csv(const std::string &path, const TrialSet &data) {
  auto out = open_output(path);
  write_trials_csv(out, data);
  require(out.good(), ErrorKind::Io, "failed writing " + path);
}

void write_truth_csv(const std::string &path, const VarTrajectory &truth,
                     const std::vector<std::string> &channels) {
  require(channels.size() == truth.dim(), ErrorKind::Shape,
          "channel names do not match the model");
  auto out = open_output(path);
  out << "t,lag,target,source,value\n";
  for (std::size_t t = 1; t <= truth.samples(); ++t)
    for (std::size_t l = 1; l <= truth.order(); ++l)
      for (std::size_t i = 0; i < truth.dim(); ++i)
        for (std::size_t j = 0; j < truth.dim(); ++j)
          out << t << ',' << l << ',' << channels[i] << ',' << channels[j] << ','
              << format_number(truth(t, l, i, j)) << '\n';
  require(out.good(), ErrorKind::Io, "failed writing " + path);
}

void write_map_csv(std::ostream &out, const TFCGCMap &map) {
  out << "t,f,gc,significant,flagged\n";
  const std::size_t nf = map.freqs.size();
  for (std::size_t i = 0; i < map.times.size(); ++i)
    for (std::size_t j = 0; j < nf; ++j) {
      const std::size_t c = i * nf + j;
      out << map.times[i] << ',' << format_number(map.freqs[j]) << ','
          << format_number(map.values(static_cast<Eigen::Index>(i),
                                      static_cast<Eigen::Index>(j)))
          << ',' << int(map.significant[c]) << ',' << int(map.flagged[c]) << '\n';
    }
}

void write_map_csv(const std::string &path, const TFCGCMap &map) {
  auto out = open_output(path);
  write_map_csv(out, map);
  require(out.good(), ErrorKind::Io, "failed writing " + path);
}

TFCGCMap parse_map_csv(std::istream &in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) &&
              strip(line) == "t,f,gc,significant,flagged",
          ErrorKind::InvalidArgument, "map CSV header must be t,f,gc,significant,flagged");
  struct Row {
    std::size_t t;
    double f, gc;
    bool sig, flag;
  };
  std::vector<Row> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip(line).empty())
      continue;
    const auto cells = split(strip(line));
    const std::string where = " on line " + std::to_string(line_no);
    require(cells.size() == 5, ErrorKind::InvalidArgument,
            "wrong number of fields" + where);
    rows.push_back({parse_index(cells[0], "t" + where),
                    parse_number(cells[1], "f" + where),
                    parse_number(cells[2], "gc" + where),
                    parse_index(cells[3], "significant" + where) != 0,
                    parse_index(cells[4], "flagged" + where) != 0});
  }
  require(!rows.empty(), ErrorKind::InvalidArgument, "map CSV holds no cells");

  TFCGCMap map;
  for (const auto &r : rows) {
    if (r.t != rows.front().t)
      break;
    map.freqs.push_back(r.f);
  }
  const std::size_t nf = map.freqs.size();
  require(rows.size() % nf == 0, ErrorKind::InvalidArgument,
          "map CSV is not a complete time x frequency grid");
  const std::size_t nt = rows.size() / nf;
  map.values.resize(static_cast<Eigen::Index>(nt), static_cast<Eigen::Index>(nf));
  map.significant.assign(rows.size(), 0);
  map.flagged.assign(rows.size(), 0);
  for (std::size_t i = 0; i < nt; ++i) {
    map.times.push_back(rows[i * nf].t);
    for (std::size_t j = 0; j < nf; ++j) {
      const Row &r = rows[i * nf + j];
      require(r.t == map.times.back() && r.f == map.freqs[j],
              ErrorKind::InvalidArgument,
              "map CSV is not a complete time x frequency grid");
      map.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r.gc;
      map.significant[i * nf + j] = r.sig;
      map.flagged[i * nf + j] = r.flag;
    }
  }
  return map;
}

TFCGCMap read_map_csv(const std::string &path) {
  auto in = open_input(path);
  return parse_map_csv(in);
}

void KeyValueFile::set(const std::string &key, const std::string &value) {
  for (auto &[k, v] : entries_)
    if (k == key) {
      v = value;
      return;
    }
  entries_.emplace_back(key, value);
}

bool KeyValueFile::has(const std::string &key) const {
  for (const auto &e : entries_)
    if (e.first == key)
      return true;
  return false;
}

const std::string &KeyValueFile::get(const std::string &key) const {
  for (const auto &e : entries_)
    if (e.first == key)
      return e.second;
  fail(ErrorKind::InvalidArgument, "missing config key " + key);
}

std::string KeyValueFile::str() const {
  std::string out;
  for (const auto &[k, v] : entries_)
    out += k + " = " + v + "\n";
  return out;
}

KeyValueFile KeyValueFile::parse(std::istream &in) {
  KeyValueFile kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = strip(line);
    if (s.empty() || s.front() == '#')
      continue;
    const auto eq = s.find('=');
    require(eq != std::string::npos, ErrorKind::InvalidArgument,
            "config line " + std::to_string(line_no) + " lacks '='");
    const std::string key = strip(s.substr(0, eq));
    require(!key.empty(), ErrorKind::InvalidArgument,
            "config line " + std::to_string(line_no) + " has an empty key");
    kv.set(key, strip(s.substr(eq + 1)));
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::string &path) {
  auto in = open_input(path);
  return parse(in);
}

void KeyValueFile::save(const std::string &path) const {
  auto out = open_output(path);
  out << str();
  require(out.good(), ErrorKind::Io, "failed writing " + path);
}

} // namespace tfcgc
