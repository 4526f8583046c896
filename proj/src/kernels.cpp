#include "nfvs/kernels.hpp"

#include <cstdlib>
#include <string>

#include "kernels_detail.hpp"
#include "nfvs/errors.hpp"

namespace nfvs::kernels {

namespace {

bool runtime_has_avx2() {
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

std::string requested_backend() {
    const char* env = std::getenv("NFVS_KERNELS");
    return env ? std::string(env) : std::string("auto");
}

template <typename T>
const Ops<T>& scalar_table_ref() {
    static const Ops<T> table = detail::make_scalar_table<T>();
    return table;
}

template <typename T>
const Ops<T>* select_table() {
    const std::string want = requested_backend();
    if (want == "scalar") return &scalar_table_ref<T>();
    const Ops<T>* avx2 = cpu_has_avx2() ? detail::avx2_table<T>() : nullptr;
    if (want == "avx2") {
        if (!avx2)
            throw ConfigError("NFVS_KERNELS=avx2 but AVX2 is unavailable on this build or CPU");
        return avx2;
    }
    if (want != "auto")
        throw ConfigError("unknown NFVS_KERNELS value '" + want +
                          "' (expected scalar, avx2, or auto)");
    return avx2 ? avx2 : &scalar_table_ref<T>();
}

}  // namespace

bool cpu_has_avx2() {
    static const bool have = runtime_has_avx2() && detail::avx2_table<float>() != nullptr;
    return have;
}

template <typename T>
const Ops<T>& active() {
    static const Ops<T>* table = select_table<T>();
    return *table;
}

template const Ops<float>& active<float>();
template const Ops<double>& active<double>();

template <typename T>
const Ops<T>& backend(const std::string& name) {
    if (name == "scalar") return scalar_table_ref<T>();
    if (name == "avx2") {
        const Ops<T>* t = cpu_has_avx2() ? detail::avx2_table<T>() : nullptr;
        if (!t) throw ConfigError("AVX2 backend unavailable on this build or CPU");
        return *t;
    }
    throw ConfigError("unknown kernel backend '" + name + "'");
}

template const Ops<float>& backend<float>(const std::string&);
template const Ops<double>& backend<double>(const std::string&);

std::vector<std::string> available_backends() {
    std::vector<std::string> names{"scalar"};
    if (cpu_has_avx2()) names.push_back("avx2");
    return names;
}

const char* active_name() { return active<float>().name; }

}  // namespace nfvs::kernels
