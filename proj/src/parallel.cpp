#include "bcp/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace bcp {

int worker_count() {
    static const int count = [] {
        int n = static_cast<int>(std::thread::hardware_concurrency());
        if (n <= 0) n = 1;
        if (const char* env = std::getenv("BCP_THREADS")) {
            char* end = nullptr;
            long cap = std::strtol(env, &end, 10);
            if (end != env && cap >= 1) n = std::min<long>(n, cap);
        }
        return n;
    }();
    return count;
}

void parallel_for(long count, const std::function<void(long, long)>& fn) {
    if (count <= 0) return;
    const long workers = std::min<long>(worker_count(), count);
    if (workers <= 1) {
        fn(0, count);
        return;
    }
    const long chunk = (count + workers - 1) / workers;
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(workers));
    for (long w = 0; w < workers; ++w) {
        const long begin = w * chunk;
        const long end = std::min(count, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : threads) t.join();
}

} // namespace bcp
