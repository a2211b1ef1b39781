#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sxsm/harness/config.hpp"

namespace sxsm::harness {

/// A playbook of the attack catalog with its parameters.
struct AttackSpec {
    std::string playbook;
    std::map<std::string, std::string> params;
    /// Name used in reports; the playbook unless set.
    std::string label;

    std::string name() const { return label.empty() ? playbook : label; }
};

/// scan, bulk_spit, identity_spoofing, header_spoofing, greylist_retry,
/// direct_ip_spit, ringtone_spit, device_spoofing, rate_adaptation,
/// account_switching, reputation_push, captcha_relay, registration_hijack.
const std::vector<std::string>& playbooks();

struct Experiment {
    std::string name;
    AttackSpec attack;
    /// Defense config file.
    std::filesystem::path defense;
    int repetitions = 1;
    std::uint64_t seed = 1;
};

struct EvalReport {
    std::string name;
    std::string attack;
    std::string defense;
    std::uint64_t seed = 0;
    int repetitions = 1;

    std::int64_t attempted = 0;
    std::int64_t forwarded = 0;
    std::int64_t rejected = 0;
    /// Challenges still unresolved when the run ended.
    std::int64_t challenged = 0;
    std::int64_t quarantined = 0;
    double bypass_rate = 0;
    double detection_rate = 0;

    std::int64_t honest_attempted = 0;
    std::int64_t honest_rejected = 0;
    std::int64_t honest_quarantined = 0;
    std::int64_t honest_challenged = 0;
    double false_positive_rate = 0;

    bool complete = true;
    std::string error;
    /// "false-positives", "incomplete".
    std::vector<std::string> flags;
    std::int64_t runtime_ms = 0;

    bool accounting_holds() const;
};

/// Data directory with fingerprints.xml and cpt_default.xml; SXSM_DATA_DIR
/// overrides the built-in location.
std::filesystem::path default_data_dir();

/// Runs the attack against a fresh simulated provider guarded by the
/// defense, with honest callers alongside. Throws ConfigError when the
/// defense does not load or the playbook is unknown; later failures give
/// an incomplete report.
EvalReport run_experiment(const Experiment& exp);

/// Same, and writes `<name>.json` and `<name>.csv` into `out_dir`.
EvalReport run_experiment(const Experiment& exp, const std::filesystem::path& out_dir);

struct MatrixSpec {
    std::vector<AttackSpec> attacks;
    std::vector<std::filesystem::path> defenses;
    std::uint64_t seed = 1;
    int repetitions = 1;
};

/// Reads an experiments file. Defense paths resolve against its directory.
/// Throws ConfigError.
MatrixSpec load_matrix_spec(const std::filesystem::path& path);

struct Matrix {
    std::vector<std::string> attacks;
    std::vector<std::string> defenses;
    /// Defense-major: cells[d * attacks.size() + a].
    std::vector<EvalReport> cells;

    const EvalReport& cell(const std::string& defense, const std::string& attack) const;
};

/// Every attack against every defense. Throws ConfigError on empty lists.
Matrix baseline_matrix(const std::vector<AttackSpec>& attacks, const std::vector<std::filesystem::path>& defenses,
                       std::uint64_t seed, int repetitions = 1);

std::string to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
/// Header row plus one row per report; no runtime column.
std::string to_csv(const std::vector<EvalReport>& reports);
std::string to_json(const Matrix& matrix);
/// bypass/detection grid, one row per defense.
std::string grid_csv(const Matrix& matrix);

/// matrix.json, matrix.csv and grid.csv.
void write_matrix(const Matrix& matrix, const std::filesystem::path& dir);
/// Every report in a directory written by write_matrix or run_experiment.
std::vector<EvalReport> read_reports(const std::filesystem::path& dir);

}  // namespace sxsm::harness
