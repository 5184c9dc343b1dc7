#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <new>
#include <tuple>
#include <vector>

namespace dpfilm {

template <class T>
struct FftwAllocator {
    using value_type = T;
    FftwAllocator() = default;
    template <class U>
    FftwAllocator(const FftwAllocator<U>&) noexcept {}
    T* allocate(std::size_t n)
    {
        void* p = fftw_malloc(n * sizeof(T));
        if (!p) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }
    template <class U>
    bool operator==(const FftwAllocator<U>&) const noexcept { return true; }
};

using cplx = std::complex<double>;
using RealBuf = std::vector<double, FftwAllocator<double>>;
using CplxBuf = std::vector<cplx, FftwAllocator<cplx>>;

namespace detail {

// The FFTW planner is not re-entrant; plans are built once per shape under a
// lock and executed lock-free through the new-array interface. All buffers
// come from fftw_malloc so alignment matches the planning arrays.
class PlanCache {
public:
    static PlanCache& get()
    {
        static PlanCache pc;
        return pc;
    }

    fftw_plan r2c(int nx, int ny) { return plan(nx, ny, true); }
    fftw_plan c2r(int nx, int ny) { return plan(nx, ny, false); }

    ~PlanCache()
    {
        for (auto& [k, p] : plans_) fftw_destroy_plan(p);
    }

private:
    fftw_plan plan(int nx, int ny, bool forward)
    {
        std::lock_guard<std::mutex> lk(mu_);
        auto key = std::make_tuple(nx, ny, forward);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        RealBuf r(std::size_t(nx) * ny);
        CplxBuf c(std::size_t(nx / 2 + 1) * ny);
        auto* cp = reinterpret_cast<fftw_complex*>(c.data());
        fftw_plan p = forward ? fftw_plan_dft_r2c_2d(ny, nx, r.data(), cp, FFTW_ESTIMATE)
                              : fftw_plan_dft_c2r_2d(ny, nx, cp, r.data(), FFTW_ESTIMATE);
        plans_.emplace(key, p);
        return p;
    }

    std::mutex mu_;
    std::map<std::tuple<int, int, bool>, fftw_plan> plans_;
};

}  // namespace detail

// Unnormalized forward transform of an ny-by-nx real array (x fastest);
// output has ny rows of nx/2+1 coefficients.
inline void fft_r2c(int nx, int ny, RealBuf& in, CplxBuf& out)
{
    out.resize(std::size_t(nx / 2 + 1) * ny);
    fftw_execute_dft_r2c(detail::PlanCache::get().r2c(nx, ny), in.data(),
                         reinterpret_cast<fftw_complex*>(out.data()));
}

// Unnormalized inverse; destroys `in`.
inline void fft_c2r(int nx, int ny, CplxBuf& in, RealBuf& out)
{
    out.resize(std::size_t(nx) * ny);
    fftw_execute_dft_c2r(detail::PlanCache::get().c2r(nx, ny),
                         reinterpret_cast<fftw_complex*>(in.data()), out.data());
}

}  // namespace dpfilm
