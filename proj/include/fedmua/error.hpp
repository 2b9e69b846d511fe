#pragma once

#include <stdexcept>
#include <string>

namespace fedmua {

// Base class for everything this library throws on purpose.
struct error : std::runtime_error {
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated precondition (dimension mismatch, empty batch, bad label, ...).
struct contract_error : error {
    explicit contract_error(const std::string& msg) : error(msg) {}
};

// Dataset / file loading problems. `kind` distinguishes failure modes so
// tests and callers can tell a bad magic from a truncated file.
struct load_error : error {
    enum class kind { bad_magic, truncated, count_mismatch, parse, missing_column, io };
    kind what_kind;
    load_error(kind k, const std::string& msg) : error(msg), what_kind(k) {}
};

struct partition_error : error {
    explicit partition_error(const std::string& msg) : error(msg) {}
};

struct aggregation_error : error {
    explicit aggregation_error(const std::string& msg) : error(msg) {}
};

// An unlearning request whose forget set cannot be matched against the
// requesting client's shard.
struct unresolvable_request_error : error {
    explicit unresolvable_request_error(const std::string& msg) : error(msg) {}
};

// ISI found no sample with a negative influence score.
struct empty_selection_error : error {
    explicit empty_selection_error(const std::string& msg) : error(msg) {}
};

struct report_error : error {
    explicit report_error(const std::string& msg) : error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw contract_error(msg);
}

}  // namespace fedmua
