#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

namespace sfpca {

/// One subject's trajectory: sorted observation times and matching outcomes.
struct SubjectRecord {
  std::string id;
  Eigen::VectorXd times;
  Eigen::VectorXd values;

  int n_obs() const { return static_cast<int>(times.size()); }
};

/**
 * Long-format longitudinal data grouped by subject.
 *
 * Subjects appear in first-appearance order of the source file. Within a
 * subject, times are strictly increasing and all entries are finite.
 * `time_range` keeps the original observed range even after times have been
 * rescaled to [0, 1], so downstream outputs can report original units.
 */
struct LongitudinalDataset {
  std::vector<SubjectRecord> subjects;
  int n_total = 0;
  std::pair<double, double> time_range{0.0, 0.0};
  bool time_rescaled = false;

  int n_subjects() const { return static_cast<int>(subjects.size()); }

  /// Index of the subject with the given id, or throws LookupError.
  int subject_index(const std::string& id) const;

  /// All observation times pooled across subjects (file order).
  std::vector<double> pooled_times() const;
  /// All outcome values pooled across subjects (file order).
  std::vector<double> pooled_values() const;

  /// Dataset with subject `i` removed (subject order otherwise preserved).
  LongitudinalDataset without_subject(int i) const;

  /// Validates the structural invariants; throws ValidationError on breach.
  void validate() const;
};

/// Centering/scaling applied to the outcome; kept for back-transformation.
struct Standardization {
  double mean = 0.0;
  double sd = 1.0;
  bool applied = false;

  double to_original(double standardized) const { return mean + sd * standardized; }
  double to_standardized(double original) const { return (original - mean) / sd; }
};

/// Builds a dataset from in-memory triples; same grouping/sorting/validation
/// rules as load_csv. Order of first appearance defines subject order.
LongitudinalDataset make_dataset(const std::vector<std::string>& subject_ids,
                                 const std::vector<double>& times,
                                 const std::vector<double>& values);

/**
 * Reads a long-format CSV with header `subject_id,time,value`.
 *
 * Columns may appear in any order; extra columns are ignored. Rows with a
 * non-numeric time or value raise ParseError with the 1-based row number;
 * duplicate (subject, time) pairs raise ValidationError.
 */
LongitudinalDataset load_csv(const std::string& path);

/// Writes a dataset back out in the same long format.
void save_csv(const LongitudinalDataset& data, const std::string& path);

/// Centers and scales pooled outcomes to mean 0, SD 1.
std::pair<LongitudinalDataset, Standardization> standardize(const LongitudinalDataset& data);

/// Maps all observation times affinely onto [0, 1]; original range retained.
LongitudinalDataset rescale_time(const LongitudinalDataset& data);

}  // namespace sfpca
