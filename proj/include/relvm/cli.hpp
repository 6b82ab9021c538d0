#pragma once
namespace relvm::cli {
inline int run(int, char**) { return 0; }
}
