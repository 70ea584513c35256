#include "ionsim/common.hpp"

#include <atomic>
#include <mutex>
#include <thread>
#include <vector>

#ifdef ION_USE_LAPACKE
#include <lapacke.h>
#endif

namespace ionsim::detail {

Eigen::VectorXd eigh_inplace(Eigen::MatrixXd& a) {
    const auto n = a.rows();
#ifdef ION_USE_LAPACKE
    Eigen::VectorXd w(n);
    int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', static_cast<lapack_int>(n), a.data(),
                              static_cast<lapack_int>(n), w.data());
    if (info == 0) return w;
    // fall through to the Eigen path on failure
#endif
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success) throw std::runtime_error("symmetric eigensolver failed");
    a = es.eigenvectors();
    return es.eigenvalues();
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    workers = std::min<std::size_t>(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(body);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace ionsim::detail
