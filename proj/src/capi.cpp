// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#include "umda/capi.h"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>

#include "umda/ablate.hpp"
#include "umda/checkpoint.hpp"
#include "umda/config.hpp"
#include "umda/eval.hpp"
#include "umda/grad_suite.hpp"
#include "umda/otbench.hpp"
#include "umda/seqio.hpp"
#include "umda/tca.hpp"
#include "umda/trainer.hpp"
#include "umda/weather.hpp"

namespace {

thread_local std::string g_last_error;

void set_last_error(const std::string& msg) { g_last_error = msg; }

int fail(int status, const std::string& msg) {
    set_last_error(msg);
    return status;
}

/// Maps the library's exception taxonomy onto status codes.
template <class Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return UMDA_OK;
    } catch (const umda::DimensionError& e) {
        return fail(UMDA_ERR_DIMENSION, e.what());
    } catch (const umda::ValidationError& e) {
        return fail(UMDA_ERR_VALIDATION, e.what());
    } catch (const umda::NumericError& e) {
        return fail(UMDA_ERR_NUMERIC, e.what());
    } catch (const umda::ConfigError& e) {
        return fail(UMDA_ERR_CONFIG, e.what());
    } catch (const umda::IoError& e) {
        return fail(UMDA_ERR_IO, e.what());
    } catch (const std::exception& e) {
        return fail(UMDA_ERR_UNKNOWN, e.what());
    } catch (...) {
        return fail(UMDA_ERR_UNKNOWN, "unknown error");
    }
}

umda::Config& as_config(umda_config* cfg) { return *reinterpret_cast<umda::Config*>(cfg); }
const umda::Config& as_config(const umda_config* cfg) {
    return *reinterpret_cast<const umda::Config*>(cfg);
}

int copy_string(const std::string& s, char* buf, size_t buf_len) {
    if (!buf || buf_len == 0) return fail(UMDA_ERR_INVALID_ARGUMENT, "null output buffer");
    if (s.size() + 1 > buf_len) return fail(UMDA_ERR_INVALID_ARGUMENT, "output buffer too small");
    std::memcpy(buf, s.c_str(), s.size() + 1);
    return UMDA_OK;
}

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::string token;
    for (std::size_t i = 0; i <= csv.size(); ++i) {
        if (i == csv.size() || csv[i] == ',') {
            if (!token.empty()) out.push_back(token);
            token.clear();
        } else if (!std::isspace(static_cast<unsigned char>(csv[i]))) {
            token += csv[i];
        }
    }
    return out;
}

} // namespace

extern "C" {

const char* umda_version(void) { return "0.1.0"; }

const char* umda_last_error(void) { return g_last_error.c_str(); }

const char* umda_status_name(int status) {
    switch (status) {
        case UMDA_OK: return "ok";
        case UMDA_ERR_INVALID_ARGUMENT: return "invalid_argument";
        case UMDA_ERR_DIMENSION: return "dimension_error";
        case UMDA_ERR_VALIDATION: return "validation_error";
        case UMDA_ERR_NUMERIC: return "numeric_error";
        case UMDA_ERR_CONFIG: return "config_error";
        case UMDA_ERR_IO: return "io_error";
        case UMDA_ERR_UNKNOWN: return "unknown_error";
    }
    return "bad_status";
}

umda_config* umda_config_create(void) {
    return reinterpret_cast<umda_config*>(new umda::Config());
}

umda_config* umda_config_load(const char* path) {
    if (!path) {
        set_last_error("null path");
        return nullptr;
    }
    try {
        auto* cfg = new umda::Config(umda::Config::from_file(path));
        g_last_error.clear();
        return reinterpret_cast<umda_config*>(cfg);
    } catch (const std::exception& e) {
        set_last_error(e.what());
        return nullptr;
    }
}

void umda_config_free(umda_config* cfg) { delete reinterpret_cast<umda::Config*>(cfg); }

int umda_config_set(umda_config* cfg, const char* key, const char* value) {
    if (!cfg || !key || !value) return fail(UMDA_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&] { as_config(cfg).set(key, value); });
}

int umda_config_get(const umda_config* cfg, const char* key, char* buf, size_t buf_len) {
    if (!cfg || !key) return fail(UMDA_ERR_INVALID_ARGUMENT, "null argument");
    if (!as_config(cfg).has(key)) return fail(UMDA_ERR_CONFIG, std::string("unknown key: ") + key);
    return copy_string(as_config(cfg).get_string(key, ""), buf, buf_len);
}

int umda_config_fingerprint(const umda_config* cfg, char* buf, size_t buf_len) {
    if (!cfg) return fail(UMDA_ERR_INVALID_ARGUMENT, "null config");
    return copy_string(umda::fingerprint_hex(as_config(cfg).fingerprint()), buf, buf_len);
}

int umda_gen_data(const umda_config* cfg, uint64_t seed, const char* out_dir) {
    if (!cfg || !out_dir) return fail(UMDA_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        const umda::RunSpec spec = umda::run_spec_from_config(as_config(cfg));
        std::filesystem::create_directories(out_dir);
        for (int i = 0; i < spec.data.source_sequences; ++i) {
            const umda::Sequence seq = umda::generate_sequence(
                spec.data.scene, umda::Rng::mix(seed, 0x100 + static_cast<std::uint64_t>(i)));
            char name[32];
            std::snprintf(name, sizeof(name), "/seq_%04d", i);
            umda::write_sequence_dir(seq, std::string(out_dir) + name);
        }
    });
}

int umda_synth(const umda_config* cfg, const char* domain, uint64_t seed, const char* seq_dir,
               const char* out_dir) {
    if (!cfg || !domain || !seq_dir || !out_dir) return fail(UMDA_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        const umda::RunSpec spec = umda::run_spec_from_config(as_config(cfg));
        const umda::DomainTag tag = umda::domain_from_name(domain);
        umda::WeatherParams params = spec.weather_for(tag);
        params.seed = seed;
        umda::synthesize_sequence_dir(seq_dir, out_dir, params);
    });
}

int umda_train_backbone(const umda_config* cfg, uint64_t seed, const char* out_dir) {
    if (!cfg || !out_dir) return fail(UMDA_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        const umda::RunSpec spec = umda::run_spec_from_config(as_config(cfg));
        umda::train_stage1(spec, seed, out_dir);
    });
}

int umda_train_dca(const umda_config* cfg, uint64_t seed, const char* checkpoint_path,
                   const char* domain, const char* out_dir) {
    if (!cfg || !checkpoint_path || !domain || !out_dir)
        return fail(UMDA_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        const umda::RunSpec spec = umda::run_spec_from_config(as_config(cfg));
        const umda::Checkpoint ckpt = umda::Checkpoint::load(checkpoint_path);
        const umda::ParameterSet* model = ckpt.find("model");
        if (!model) throw umda::ConfigError("checkpoint has no 'model' group");
        umda::train_stage2_dca(*model, umda::domain_from_name(domain), spec, seed, out_dir);
    });
}

int umda_eval(const umda_config* cfg, uint64_t seed, const char* checkpoint_path, const char* domain,
              const char* out_dir, umda_eval_metrics* out) {
    if (!cfg || !checkpoint_path || !domain) return fail(UMDA_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        const umda::RunSpec spec = umda::run_spec_from_config(as_config(cfg));
        const umda::DomainTag tag = umda::domain_from_name(domain);
        const umda::Checkpoint ckpt = umda::Checkpoint::load(checkpoint_path);
        const umda::ParameterSet* model = ckpt.find("model");
        if (!model) throw umda::ConfigError("checkpoint has no 'model' group");
        const umda::ParameterSet* adapter =
            tag == umda::DomainTag::Source ? nullptr
                                           : ckpt.find(std::string("adapter/") + umda::domain_name(tag));

        const umda::EvalSequenceSet set = umda::build_eval_set(spec, tag, umda::Rng::mix(seed, 0xEBA1));
        const umda::EvalResult result =
            umda::evaluate_set(*model, adapter, spec.enc, set, spec.precision_threshold_px);
        if (out_dir) umda::export_metrics(result, out_dir, as_config(cfg), {seed});
        if (out) {
            out->auc = result.auc;
            out->precision = result.precision;
            out->ao = result.ao;
            out->sr50 = result.sr50;
            out->sr75 = result.sr75;
            out->frames = result.frames;
        }
    });
}

int umda_ablate(const umda_config* cfg, const char* presets_csv, const char* seeds_csv,
                const char* out_csv) {
    if (!cfg || !presets_csv || !seeds_csv || !out_csv)
        return fail(UMDA_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        const std::vector<std::string> presets = split_csv(presets_csv);
        std::vector<std::uint64_t> seeds;
        for (const auto& s : split_csv(seeds_csv)) seeds.push_back(std::stoull(s));
        const auto cells = umda::run_ablation(as_config(cfg), presets, seeds);
        umda::write_ablation_csv(cells, out_csv);
    });
}

int umda_ot_bench(const umda_config* cfg, uint64_t seed, const char* out_csv) {
    if (!cfg || !out_csv) return fail(UMDA_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        const int instances = as_config(cfg).get_int("ot_bench.instances", 5);
        const auto rows = umda::run_ot_bench(instances, seed);
        umda::write_ot_bench_csv(rows, out_csv);
    });
}

int umda_grad_check(uint64_t seed, char* report_buf, size_t buf_len, int32_t* all_passed) {
    return guarded([&] {
        const umda::GradSuiteResult result = umda::run_grad_suite(seed);
        if (all_passed) *all_passed = result.all_passed() ? 1 : 0;
        if (report_buf && buf_len > 0) {
            const std::string report = umda::grad_suite_report(result);
            const size_t n = std::min(buf_len - 1, report.size());
            std::memcpy(report_buf, report.data(), n);
            report_buf[n] = '\0';
        }
    });
}

int umda_sinkhorn(int32_t n, const double* cost, const double* a, const double* b, double epsilon,
                  int32_t max_iter, double tol, double* plan_out, double* mu_out, double* nu_out,
                  int32_t* iterations_out, double* residual_out, int32_t* converged_out) {
    if (n < 1 || !cost || !a || !b) return fail(UMDA_ERR_INVALID_ARGUMENT, "bad inputs");
    return guarded([&] {
        const std::size_t nn = static_cast<std::size_t>(n) * n;
        const umda::SinkhornResult r =
            umda::sinkhorn(std::vector<double>(cost, cost + nn), std::vector<double>(a, a + n),
                           std::vector<double>(b, b + n), epsilon, max_iter, tol);
        if (plan_out) std::memcpy(plan_out, r.plan.data(), nn * sizeof(double));
        if (mu_out) std::memcpy(mu_out, r.mu.data(), static_cast<std::size_t>(n) * sizeof(double));
        if (nu_out) std::memcpy(nu_out, r.nu.data(), static_cast<std::size_t>(n) * sizeof(double));
        if (iterations_out) *iterations_out = r.iterations;
        if (residual_out) *residual_out = r.residual;
        if (converged_out) *converged_out = r.converged ? 1 : 0;
    });
}

int umda_lp_optimum(int32_t n, const double* cost, const double* a, const double* b, double* cost_out,
                    double* plan_out) {
    if (n < 1 || !cost || !a || !b) return fail(UMDA_ERR_INVALID_ARGUMENT, "bad inputs");
    return guarded([&] {
        const std::size_t nn = static_cast<std::size_t>(n) * n;
        const umda::LpSolution sol =
            umda::lp_oracle(std::vector<double>(cost, cost + nn), std::vector<double>(a, a + n),
                            std::vector<double>(b, b + n));
        if (cost_out) *cost_out = sol.cost;
        if (plan_out) std::memcpy(plan_out, sol.plan.data(), nn * sizeof(double));
    });
}

int umda_ssim(int32_t width, int32_t height, const double* rgb_a, const double* rgb_b,
              double* ssim_out) {
    if (width < 1 || height < 1 || !rgb_a || !rgb_b || !ssim_out)
        return fail(UMDA_ERR_INVALID_ARGUMENT, "bad inputs");
    return guarded([&] {
        const std::size_t len = static_cast<std::size_t>(3) * width * height;
        umda::Frame fa, fb;
        fa.width = fb.width = width;
        fa.height = fb.height = height;
        fa.pixels.assign(rgb_a, rgb_a + len);
        fb.pixels.assign(rgb_b, rgb_b + len);
        *ssim_out = umda::ssim(fa, fb);
    });
}

} // extern "C"
