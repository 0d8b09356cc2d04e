#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace subid {

enum class ErrorKind {
    NumericalFailure,
    BadShape,
    NotPsd,
    RiccatiDivergence,
    MissingGain,
    Unsupported,
    NotObservable,
    LeadingBlockSingular,
    BadWindow,
    RankDeficientRegressors,
    DegenerateState,
    ShiftSolveIllConditioned,
    NeedDeeperVarx,
    BadLoopSpec,
    Precondition,
    Parse,
};

std::string_view to_string(ErrorKind kind);

// Every failure in the library is reported through this type. `stage` names the
// pipeline step that raised it (empty for standalone calls).
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, std::string stage = {})
        : std::runtime_error(compose(kind, message, stage)),
          kind_(kind),
          stage_(std::move(stage)),
          detail_(message) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }
    [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

    // Re-raise with a stage label prepended, keeping the original kind.
    [[nodiscard]] Error with_stage(const std::string& stage) const {
        return Error(kind_, detail_, stage_.empty() ? stage : stage + "/" + stage_);
    }

private:
    static std::string compose(ErrorKind kind, const std::string& message,
                               const std::string& stage) {
        std::string out(to_string(kind));
        if (!stage.empty()) out += " [" + stage + "]";
        out += ": " + message;
        return out;
    }

    ErrorKind kind_;
    std::string stage_;
    std::string detail_;
};

}  // namespace subid
