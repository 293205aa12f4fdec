#pragma once

namespace ddif {

// Full command-line front end. Returns the process exit code: 0 on
// success, 1 for usage errors, 2 for data or processing errors.
int cli_main(int argc, char** argv);

}  // namespace ddif
