#pragma once

#include "tfcgc/covariance.hpp"
#include "tfcgc/spectral.hpp"
#include "tfcgc/tvarx.hpp"

#include <Eigen/Dense>

#include <fstream>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace tfcgc {

/// 17 significant digits, enough to read back the same double.
std::string format_number(double v);
double parse_number(const std::string &text, const std::string &what);

/// Reads `trial,t,<ch1>,...`. Rows of a trial may be interleaved with other
/// trials but every trial must hold t = 1..N exactly once. Trials are ordered
/// by ascending id.
TrialSet read_trials_csv(const std::string &path, double sampling_rate);
TrialSet parse_trials_csv(std::istream &in, double sampling_rate);

/// Writes trials with ids 1..B.
void write_trials_csv(const std::string &path, const TrialSet &data);
void write_trials_csv(std::ostream &out, const TrialSet &data);

/// Long format `t,lag,target,source,value` for every coefficient.
void write_truth_csv(const std::string &path, const VarTrajectory &truth,
                     const std::vector<std::string> &channels);

/// `t,f,gc,significant,flagged`, time-major.
void write_map_csv(const std::string &path, const TFCGCMap &map);
void write_map_csv(std::ostream &out, const TFCGCMap &map);
TFCGCMap read_map_csv(const std::string &path);
TFCGCMap parse_map_csv(std::istream &in);

/// Ordered `key = value` pairs; lines starting with '#' are comments.
class KeyValueFile {
public:
  void set(const std::string &key, const std::string &value);
  bool has(const std::string &key) const;
  const std::string &get(const std::string &key) const;
  const std::vector<std::pair<std::string, std::string>> &entries() const {
    return entries_;
  }

  std::string str() const;
  static KeyValueFile parse(std::istream &in);
  static KeyValueFile load(const std::string &path);
  void save(const std::string &path) const;

private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Opens a file for writing; throws an I/O error if the directory is missing.
std::ofstream open_output(const std::string &path);

} // namespace tfcgc
