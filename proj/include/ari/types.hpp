#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ari {

// 0-based class label. Rules and firing tables use kAbstain for "no vote";
// the same sentinel value appears in serialized firing tables.
using Label = int;
constexpr Label kAbstain = -1;

enum class Split { Labeled, Unlabeled, Valid, Test };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::Labeled: return "labeled";
        case Split::Unlabeled: return "unlabeled";
        case Split::Valid: return "valid";
        case Split::Test: return "test";
    }
    return "?";
}

// Bad inputs, malformed files, contract violations. The CLI maps this to
// exit code 1; anything else escaping a command maps to exit code 2.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ari
