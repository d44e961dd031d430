#include "hoa/simd.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace hoa::simd {

#if !defined(HOA_HAVE_AVX2_TU)
namespace detail {
const KernelTable* avx2_table() noexcept { return nullptr; }
} // namespace detail
#endif

bool isa_supported(Isa isa) noexcept {
    switch (isa) {
    case Isa::kScalar:
        return true;
    case Isa::kAvx2:
#if defined(HOA_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
        return detail::avx2_table() != nullptr && __builtin_cpu_supports("avx2") &&
               __builtin_cpu_supports("fma");
#else
        return false;
#endif
    }
    return false;
}

const KernelTable& table(Isa isa) {
    if (!isa_supported(isa)) throw std::invalid_argument("ISA not supported on this CPU: " +
                                                         std::string(isa_name(isa)));
    return isa == Isa::kAvx2 ? *detail::avx2_table() : detail::scalar_table();
}

namespace {

const KernelTable* pick_default() noexcept {
    const char* env = std::getenv("HOA_SIMD");
    if (env != nullptr && std::string_view(env) == "scalar") return &detail::scalar_table();
    if (isa_supported(Isa::kAvx2)) return detail::avx2_table();
    return &detail::scalar_table();
}

std::atomic<const KernelTable*>& slot() noexcept {
    static std::atomic<const KernelTable*> current{pick_default()};
    return current;
}

} // namespace

const KernelTable& active() noexcept { return *slot().load(std::memory_order_relaxed); }

void set_active(Isa isa) { slot().store(&table(isa), std::memory_order_relaxed); }

std::string_view isa_name(Isa isa) noexcept {
    return isa == Isa::kAvx2 ? "avx2" : "scalar";
}

} // namespace hoa::simd
