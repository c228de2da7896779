#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "klpriv/accountant.hpp"
#include "klpriv/data.hpp"
#include "klpriv/network.hpp"

namespace klpriv::cli {

/// Everything a command needs. Serialized into every output header; `out`
/// and `threads` are excluded since they do not affect file contents.
struct RunConfig {
    std::string command;
    std::string scheme = "lecun";  // lecun | he | ntk | xavier | all | custom:b1,b2,...
    std::optional<std::size_t> d;  // unset: taken from the data (synthetic default 10)
    std::vector<std::size_t> widths{100};
    std::vector<std::size_t> depths{3};
    std::size_t outputs = 1;
    double eta = 1e-3;
    std::size_t steps = 100;
    double sigma2 = 1e-2;
    std::size_t runs = 6;
    std::uint64_t seed = 0;
    NeighborNotion neighbor = NeighborNotion::RemoveOne;
    KlConvention kl_constant = KlConvention::PaperHalfSigma2;
    std::string data = "synth:100";
    std::string model = "dnn";  // dnn | linearized
    std::size_t pool = 0;       // 0: automatic for add/replace
    std::size_t neighbor_cap = kDefaultNeighborCap;
    std::string label_column = "label";
    NormalizeMode normalize = NormalizeMode::Cap;
    std::size_t record_every = 1;
    std::optional<double> replay_sigma2;
    std::optional<double> horizon;  // key "T"; unset: eta·steps
    std::optional<double> c;
    std::optional<double> beta_smooth;
    std::optional<double> rank;
    double eps = 1.0;
    std::size_t samples = 4000;
    std::optional<double> ridge;
    bool train = false;
    bool empirical = false;

    std::string out;
    unsigned threads = 0;

    double time_horizon() const { return horizon.value_or(eta * static_cast<double>(steps)); }
    /// Throws ValidationError on inconsistent settings for `command`.
    void validate() const;
};

using Entries = std::vector<std::pair<std::string, std::string>>;

/// Canonical key order; values are formatted so that parse(serialize(c)) == c.
Entries serialize(const RunConfig& cfg);
/// Unknown keys and malformed values raise ParseError.
RunConfig parse_entries(const std::map<std::string, std::string>& kv);

/// key=value lines. Lines starting with '#' have the marker stripped, lines
/// without '=' are ignored, so an output file can be fed back as a config.
std::map<std::string, std::string> parse_key_values(const std::string& text);
std::map<std::string, std::string> load_config_file(const std::string& path);

/// "# klpriv <version>" followed by "# key=value" per entry.
std::string header_text(const RunConfig& cfg);

/// Shortest round-trip decimal; "inf", "-inf", "nan" for non-finite values.
std::string format_double(double v);
double parse_double(const std::string& s, const std::string& key);

std::vector<InitScheme> selected_schemes(const RunConfig& cfg);

struct DataSpec {
    bool synthetic = true;
    std::size_t n = 0;
    std::string path;
};
DataSpec parse_data_spec(const std::string& spec);

}  // namespace klpriv::cli
