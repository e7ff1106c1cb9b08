#include "sfda/nn/layers.hpp"

#include <algorithm>
#include <thread>

namespace sfda::nn {

namespace {
int resolve_default() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    return static_cast<int>(std::min(hw, 4u));
}
int g_threads = resolve_default();
}  // namespace

int num_threads() { return g_threads; }

void set_num_threads(int n) { g_threads = std::max(1, n); }

}  // namespace sfda::nn
