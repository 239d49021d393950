#pragma once

#include <ostream>

namespace dkflab::accept {

/// Runs the full acceptance battery, printing one PASS/FAIL line per
/// criterion. Returns the number of failed criteria.
int run_all(std::ostream& out);

}  // namespace dkflab::accept
