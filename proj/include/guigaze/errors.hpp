#pragma once

#include <stdexcept>
#include <string>

namespace guigaze {

/// An operation was invoked outside its contract (e.g. asking for the crop
/// region of a no-tool action).
struct contract_error : std::logic_error {
  using std::logic_error::logic_error;
};

/// A numeric argument is outside the operation's domain: non-finite
/// coordinate, non-positive zoom scale, importance ratio <= 0, ...
struct invalid_input_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// The ground-truth box has zero area; the record cannot be scored.
struct degenerate_target_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A requested crop rasterizes to zero pixels.
struct empty_crop_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A reward group is too small to normalize (fewer than two trajectories).
struct invalid_group_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Synthetic screen generation could not place the requested elements.
struct generation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A config or dataset file is missing, unreadable, or malformed.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct dataset_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Image file could not be read or written.
struct image_io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The policy transport (e.g. an HTTP model server) failed. Distinct from a
/// format failure: the episode is aborted, not scored as malformed output.
struct policy_transport_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace guigaze
