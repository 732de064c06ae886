#pragma once

// Probabilistic amplitude shaping: distribution matchers (LUT sphere
// shaping, enumerative sphere shaping, constant-composition DM, ideal MB
// sampler), 4D-serial PAS framing and information-rate accounting.
//
// All matchers map k-bit words to length-N sequences over the odd
// amplitude alphabet {1, 3, ..., 2*Ma - 1}. Tables and trellises are
// immutable after construction; encode/decode are pure.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "uplink/sigkit.hpp"

namespace uplink::shaping {

using bigint = boost::multiprecision::cpp_int;

struct AmplitudeAlphabet {
    std::vector<int> levels;  // {1, 3, ..., 2*Ma - 1}
    int ma = 0;               // number of amplitude levels
    int bits_per_1d = 0;      // m = log2(2*Ma): sign bit + amplitude bits

    explicit AmplitudeAlphabet(int num_levels) : ma(num_levels) {
        if (ma < 2 || (ma & (ma - 1)) != 0)
            throw std::invalid_argument("AmplitudeAlphabet: Ma must be a power of two >= 2");
        levels.resize(static_cast<std::size_t>(ma));
        for (int i = 0; i < ma; ++i) levels[static_cast<std::size_t>(i)] = 2 * i + 1;
        bits_per_1d = 1 + static_cast<int>(std::lround(std::log2(ma)));
    }

    int energy(int index) const {
        const int a = levels.at(static_cast<std::size_t>(index));
        return a * a;
    }
};

inline long long sequence_energy(const std::vector<int>& amplitudes) {
    long long e = 0;
    for (int a : amplitudes) e += static_cast<long long>(a) * a;
    return e;
}

// ---------------------------------------------------------------------------
// LUT sphere shaping: table of the 2^k minimum-energy sequences under the
// deterministic (energy, lexicographic-on-indices) order.

class LutDm {
  public:
    LutDm(const AmplitudeAlphabet& alphabet, int block_len, int input_bits)
        : alphabet_(alphabet), n_(block_len), k_(input_bits) {
        if (n_ < 1 || k_ < 0) throw std::invalid_argument("LutDm: bad N or k");
        const double total_log2 = n_ * std::log2(static_cast<double>(alphabet_.ma));
        if (total_log2 > 24.0)
            throw std::invalid_argument(
                "LutDm: Ma^N exceeds the enumeration guard (2^24); use ESS instead");
        const std::uint64_t total = 1ull << static_cast<int>(std::lround(total_log2));
        if (k_ >= 63 || (1ull << k_) > total)
            throw std::invalid_argument("LutDm: 2^k exceeds the number of sequences");

        // Enumerate every sequence packed base-Ma with the first amplitude
        // in the most significant digit, so integer order on the packed
        // code is exactly lexicographic order on (a_1, ..., a_N).
        std::vector<std::pair<std::uint32_t, std::uint32_t>> all(total);  // (energy, packed)
        for (std::uint64_t code = 0; code < total; ++code) {
            std::uint64_t c = code;
            std::uint32_t e = 0;
            for (int i = 0; i < n_; ++i) {
                e += static_cast<std::uint32_t>(alphabet_.energy(static_cast<int>(c % alphabet_.ma)));
                c /= static_cast<std::uint64_t>(alphabet_.ma);
            }
            all[code] = {e, static_cast<std::uint32_t>(code)};
        }
        std::sort(all.begin(), all.end());
        table_.resize(1ull << k_);
        for (std::uint64_t addr = 0; addr < table_.size(); ++addr) {
            table_[addr] = all[addr].second;
            decode_map_.emplace(all[addr].second, static_cast<std::uint32_t>(addr));
        }
        max_energy_ = all[table_.size() - 1].first;
    }

    int block_length() const { return n_; }
    int input_bits() const { return k_; }
    double rate_bits_per_amplitude() const { return static_cast<double>(k_) / n_; }
    long long max_energy() const { return max_energy_; }
    std::size_t table_size() const { return table_.size(); }
    const AmplitudeAlphabet& alphabet() const { return alphabet_; }

    // Reported memory footprint in bits: encode 2^k * N * log2(Ma),
    // decode Ma^N * k.
    std::uint64_t encode_memory_bits() const {
        return (1ull << k_) * static_cast<std::uint64_t>(n_) *
               static_cast<std::uint64_t>(std::lround(std::log2(alphabet_.ma)));
    }
    std::uint64_t decode_memory_bits() const {
        std::uint64_t total = 1;
        for (int i = 0; i < n_; ++i) total *= static_cast<std::uint64_t>(alphabet_.ma);
        return total * static_cast<std::uint64_t>(k_);
    }

    // Encode with an optional reduced word size k' <= k (rate adaptation:
    // only the first 2^k' table rows are used).
    std::vector<int> encode(std::uint64_t bits, int runtime_k = -1) const {
        const int kk = runtime_k < 0 ? k_ : runtime_k;
        if (kk > k_) throw std::invalid_argument("LutDm::encode: runtime k exceeds table k");
        if (bits >= (1ull << kk)) throw std::invalid_argument("LutDm::encode: word out of range");
        return unpack(table_[bits]);
    }

    std::uint64_t decode(const std::vector<int>& amplitudes) const {
        auto it = decode_map_.find(pack(amplitudes));
        if (it == decode_map_.end())
            throw std::invalid_argument("LutDm::decode: sequence not in codebook");
        return it->second;
    }

    std::vector<int> row(std::uint64_t addr) const { return unpack(table_.at(addr)); }

  private:
    std::uint32_t pack(const std::vector<int>& amplitudes) const {
        if (static_cast<int>(amplitudes.size()) != n_)
            throw std::invalid_argument("LutDm: wrong sequence length");
        std::uint32_t code = 0;
        for (int a : amplitudes) {
            const int idx = (a - 1) / 2;
            if (idx < 0 || idx >= alphabet_.ma || a != alphabet_.levels[static_cast<std::size_t>(idx)])
                throw std::invalid_argument("LutDm: amplitude outside alphabet");
            code = code * static_cast<std::uint32_t>(alphabet_.ma) + static_cast<std::uint32_t>(idx);
        }
        return code;
    }
    std::vector<int> unpack(std::uint32_t code) const {
        std::vector<int> out(static_cast<std::size_t>(n_));
        for (int i = n_ - 1; i >= 0; --i) {
            out[static_cast<std::size_t>(i)] =
                alphabet_.levels[code % static_cast<std::uint32_t>(alphabet_.ma)];
            code /= static_cast<std::uint32_t>(alphabet_.ma);
        }
        return out;
    }

    AmplitudeAlphabet alphabet_;
    int n_;
    int k_;
    std::uint32_t max_energy_ = 0;
    std::vector<std::uint32_t> table_;
    std::unordered_map<std::uint32_t, std::uint32_t> decode_map_;
};

// ---------------------------------------------------------------------------
// Enumerative sphere shaping with exact-integer counts. The enumeration
// order is energy-major, then lexicographic on amplitude indices, i.e. the
// same total order the LUT uses, so both describe the same codebook when
// E_max matches.

class EssDm {
  public:
    // Counts are stored per (length, energy) with energies compressed as
    // e = len + 8*t (sums of squares of odd integers).
    EssDm(const AmplitudeAlphabet& alphabet, int block_len, long long energy_bound)
        : alphabet_(alphabet), n_(block_len), emax_(energy_bound) {
        if (n_ < 1) throw std::invalid_argument("EssDm: N must be >= 1");
        if (emax_ < n_) throw std::invalid_argument("EssDm: energy bound below minimum energy");
        build_trellis();
        total_ = 0;
        for (long long e = n_; e <= emax_; e += 8) total_ += shell_count(n_, e);
        if (total_ == 0) throw std::invalid_argument("EssDm: empty codebook");
        k_ = 0;
        while ((bigint(1) << (k_ + 1)) <= total_) ++k_;
    }

    // Smallest E_max whose codebook holds at least 2^k sequences.
    static EssDm with_input_bits(const AmplitudeAlphabet& alphabet, int block_len, int input_bits) {
        const bigint need = bigint(1) << input_bits;
        EssDm probe(alphabet, block_len,
                    static_cast<long long>(block_len) * alphabet.levels.back() * alphabet.levels.back());
        if (probe.total_ < need)
            throw std::invalid_argument("EssDm: k exceeds the number of sequences");
        bigint acc = 0;
        long long emax = probe.emax_;
        for (long long e = block_len; e <= probe.emax_; e += 8) {
            acc += probe.shell_count(block_len, e);
            if (acc >= need) {
                emax = e;
                break;
            }
        }
        EssDm dm(alphabet, block_len, emax);
        dm.k_ = input_bits;
        return dm;
    }

    int block_length() const { return n_; }
    int input_bits() const { return k_; }
    long long energy_bound() const { return emax_; }
    const bigint& codebook_size() const { return total_; }
    const AmplitudeAlphabet& alphabet() const { return alphabet_; }

    std::vector<int> encode(const bigint& index) const {
        if (index < 0 || index >= (bigint(1) << k_))
            throw std::invalid_argument("EssDm::encode: word out of range");
        bigint rem = index;
        // Find the energy shell.
        long long shell = -1;
        for (long long e = n_; e <= emax_; e += 8) {
            const bigint c = shell_count(n_, e);
            if (rem < c) {
                shell = e;
                break;
            }
            rem -= c;
        }
        if (shell < 0) throw std::logic_error("EssDm::encode: shell search failed");
        // Lexicographic unranking inside the shell.
        std::vector<int> out;
        out.reserve(static_cast<std::size_t>(n_));
        long long e = shell;
        for (int pos = 0; pos < n_; ++pos) {
            for (int idx = 0; idx < alphabet_.ma; ++idx) {
                const long long erem = e - alphabet_.energy(idx);
                const bigint c = shell_count(n_ - pos - 1, erem);
                if (rem < c) {
                    out.push_back(alphabet_.levels[static_cast<std::size_t>(idx)]);
                    e = erem;
                    break;
                }
                rem -= c;
            }
        }
        if (static_cast<int>(out.size()) != n_) throw std::logic_error("EssDm::encode: unranking failed");
        return out;
    }

    bigint decode(const std::vector<int>& amplitudes) const {
        if (static_cast<int>(amplitudes.size()) != n_)
            throw std::invalid_argument("EssDm::decode: wrong sequence length");
        const long long etot = sequence_energy(amplitudes);
        if (etot > emax_) throw std::invalid_argument("EssDm::decode: sequence outside codebook");
        bigint rank = 0;
        for (long long e = n_; e < etot; e += 8) rank += shell_count(n_, e);
        long long e = etot;
        for (int pos = 0; pos < n_; ++pos) {
            const int idx = (amplitudes[static_cast<std::size_t>(pos)] - 1) / 2;
            if (idx < 0 || idx >= alphabet_.ma)
                throw std::invalid_argument("EssDm::decode: amplitude outside alphabet");
            for (int lower = 0; lower < idx; ++lower)
                rank += shell_count(n_ - pos - 1, e - alphabet_.energy(lower));
            e -= alphabet_.energy(idx);
        }
        if (rank >= (bigint(1) << k_))
            throw std::invalid_argument("EssDm::decode: sequence outside the 2^k codebook");
        return rank;
    }

    // Number of length-`len` sequences with energy exactly e.
    bigint shell_count(int len, long long e) const {
        if (len == 0) return e == 0 ? 1 : 0;
        if (e < len || e > emax_ || (e - len) % 8 != 0) return 0;
        const std::size_t t = static_cast<std::size_t>((e - len) / 8);
        const auto& row = counts_[static_cast<std::size_t>(len)];
        return t < row.size() ? row[t] : 0;
    }

  private:
    void build_trellis() {
        counts_.resize(static_cast<std::size_t>(n_) + 1);
        counts_[0] = {bigint(1)};  // length 0: energy 0 only
        for (int len = 1; len <= n_; ++len) {
            const std::size_t tmax = static_cast<std::size_t>((emax_ - len) / 8);
            auto& row = counts_[static_cast<std::size_t>(len)];
            row.assign(tmax + 1, 0);
            for (std::size_t t = 0; t <= tmax; ++t) {
                const long long e = len + 8 * static_cast<long long>(t);
                bigint acc = 0;
                for (int idx = 0; idx < alphabet_.ma; ++idx) {
                    const long long erem = e - alphabet_.energy(idx);
                    if (len == 1) {
                        if (erem == 0) acc += 1;
                    } else if (erem >= len - 1 && (erem - (len - 1)) % 8 == 0) {
                        const std::size_t tr = static_cast<std::size_t>((erem - (len - 1)) / 8);
                        const auto& prev = counts_[static_cast<std::size_t>(len - 1)];
                        if (tr < prev.size()) acc += prev[tr];
                    }
                }
                row[t] = acc;
            }
        }
    }

    AmplitudeAlphabet alphabet_;
    int n_;
    long long emax_;
    int k_ = 0;
    bigint total_ = 0;
    std::vector<std::vector<bigint>> counts_;
};

// ---------------------------------------------------------------------------
// Constant-composition DM: every output sequence carries exactly the
// stated per-level occurrence counts; k = floor(log2 multinomial).

class CcdmDm {
  public:
    CcdmDm(const AmplitudeAlphabet& alphabet, std::vector<int> composition)
        : alphabet_(alphabet), composition_(std::move(composition)) {
        if (static_cast<int>(composition_.size()) != alphabet_.ma)
            throw std::invalid_argument("CcdmDm: composition size must equal Ma");
        n_ = 0;
        for (int c : composition_) {
            if (c < 0) throw std::invalid_argument("CcdmDm: negative occurrence count");
            n_ += c;
        }
        if (n_ < 1) throw std::invalid_argument("CcdmDm: empty composition");
        total_ = multinomial(composition_);
        k_ = 0;
        while ((bigint(1) << (k_ + 1)) <= total_) ++k_;
    }

    int block_length() const { return n_; }
    int input_bits() const { return k_; }
    const bigint& codebook_size() const { return total_; }
    const std::vector<int>& composition() const { return composition_; }
    const AmplitudeAlphabet& alphabet() const { return alphabet_; }

    // Entropy in bits of the composition read as a probability vector.
    double composition_entropy_bits() const {
        double h = 0.0;
        for (int c : composition_) {
            if (c == 0) continue;
            const double p = static_cast<double>(c) / n_;
            h -= p * std::log2(p);
        }
        return h;
    }

    std::vector<int> encode(const bigint& index) const {
        if (index < 0 || index >= (bigint(1) << k_))
            throw std::invalid_argument("CcdmDm::encode: word out of range");
        std::vector<int> rem = composition_;
        bigint count = total_;
        bigint idx = index;
        std::vector<int> out;
        out.reserve(static_cast<std::size_t>(n_));
        for (int pos = 0; pos < n_; ++pos) {
            const int npos = n_ - pos;
            for (int lev = 0; lev < alphabet_.ma; ++lev) {
                auto& c = rem[static_cast<std::size_t>(lev)];
                if (c == 0) continue;
                const bigint sub = count * c / npos;  // exact
                if (idx < sub) {
                    out.push_back(alphabet_.levels[static_cast<std::size_t>(lev)]);
                    count = sub;
                    --c;
                    break;
                }
                idx -= sub;
            }
        }
        if (static_cast<int>(out.size()) != n_) throw std::logic_error("CcdmDm::encode failed");
        return out;
    }

    bigint decode(const std::vector<int>& amplitudes) const {
        if (static_cast<int>(amplitudes.size()) != n_)
            throw std::invalid_argument("CcdmDm::decode: wrong sequence length");
        std::vector<int> rem = composition_;
        bigint count = total_;
        bigint rank = 0;
        for (int pos = 0; pos < n_; ++pos) {
            const int npos = n_ - pos;
            const int target = (amplitudes[static_cast<std::size_t>(pos)] - 1) / 2;
            if (target < 0 || target >= alphabet_.ma)
                throw std::invalid_argument("CcdmDm::decode: amplitude outside alphabet");
            bool placed = false;
            for (int lev = 0; lev < alphabet_.ma; ++lev) {
                auto& c = rem[static_cast<std::size_t>(lev)];
                if (c == 0) continue;
                const bigint sub = count * c / npos;
                if (lev == target) {
                    count = sub;
                    --c;
                    placed = true;
                    break;
                }
                rank += sub;
            }
            if (!placed) throw std::invalid_argument("CcdmDm::decode: composition mismatch");
        }
        if (rank >= (bigint(1) << k_))
            throw std::invalid_argument("CcdmDm::decode: sequence outside the 2^k codebook");
        return rank;
    }

    static bigint multinomial(const std::vector<int>& counts) {
        bigint r = 1;
        int n = 0;
        for (int c : counts)
            for (int i = 1; i <= c; ++i) {
                ++n;
                r = r * n / i;  // exact at every step
            }
        return r;
    }

  private:
    AmplitudeAlphabet alphabet_;
    std::vector<int> composition_;
    int n_ = 0;
    int k_ = 0;
    bigint total_ = 0;
};

// ---------------------------------------------------------------------------
// Ideal i.i.d. Maxwell-Boltzmann source: P(a) proportional to exp(-l a^2),
// with l solved so the distribution entropy equals the target rate.

struct MbDistribution {
    AmplitudeAlphabet alphabet;
    std::vector<double> probs;
    double lambda = 0.0;

    double entropy_bits() const {
        double h = 0.0;
        for (double p : probs)
            if (p > 0.0) h -= p * std::log2(p);
        return h;
    }
};

inline MbDistribution mb_distribution(const AmplitudeAlphabet& alphabet,
                                      double target_rate_bits_per_amp) {
    const double hmax = std::log2(static_cast<double>(alphabet.ma));
    if (target_rate_bits_per_amp <= 0.0 || target_rate_bits_per_amp > hmax)
        throw std::invalid_argument("mb_distribution: rate outside (0, log2 Ma]");
    auto dist_for = [&](double lambda) {
        std::vector<double> p(alphabet.levels.size());
        double z = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            p[i] = std::exp(-lambda * alphabet.levels[i] * alphabet.levels[i]);
            z += p[i];
        }
        for (auto& v : p) v /= z;
        return p;
    };
    auto entropy = [&](double lambda) {
        double h = 0.0;
        for (double p : dist_for(lambda))
            if (p > 0.0) h -= p * std::log2(p);
        return h;
    };
    MbDistribution out{alphabet, {}, 0.0};
    if (target_rate_bits_per_amp == hmax) {
        out.probs = dist_for(0.0);
        return out;
    }
    double lo = 0.0, hi = 1.0;
    while (entropy(hi) > target_rate_bits_per_amp) {
        hi *= 2.0;
        if (hi > 1e6) throw std::runtime_error("mb_distribution: target rate too small");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (entropy(mid) > target_rate_bits_per_amp)
            lo = mid;
        else
            hi = mid;
        if (std::abs(entropy(0.5 * (lo + hi)) - target_rate_bits_per_amp) < 1e-12) break;
    }
    out.lambda = 0.5 * (lo + hi);
    out.probs = dist_for(out.lambda);
    return out;
}

inline std::vector<int> mb_sample(const MbDistribution& dist, std::size_t count,
                                  std::mt19937_64& rng) {
    std::discrete_distribution<int> pick(dist.probs.begin(), dist.probs.end());
    std::vector<int> out(count);
    for (auto& a : out) a = dist.alphabet.levels[static_cast<std::size_t>(pick(rng))];
    return out;
}

// CCDM composition from the MB distribution at the target rate, largest-
// remainder rounding to N slots.
inline std::vector<int> mb_composition(const AmplitudeAlphabet& alphabet, int block_len,
                                       double target_rate_bits_per_amp) {
    const auto mb = mb_distribution(alphabet, target_rate_bits_per_amp);
    std::vector<int> comp(mb.probs.size());
    std::vector<std::pair<double, std::size_t>> rem;
    int assigned = 0;
    for (std::size_t i = 0; i < mb.probs.size(); ++i) {
        const double exact = mb.probs[i] * block_len;
        comp[i] = static_cast<int>(std::floor(exact));
        assigned += comp[i];
        rem.emplace_back(exact - std::floor(exact), i);
    }
    std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    for (int i = 0; i < block_len - assigned; ++i) comp[rem[static_cast<std::size_t>(i)].second]++;
    return comp;
}

// ---------------------------------------------------------------------------
// 4D-serial PAS framing: 4 consecutive shaped amplitudes and 4 sign bits
// form (I_x, Q_x, I_y, Q_y) of one dual-polarization symbol pair. Symbol
// energy is normalized to unit 4D mean using the realized empirical
// distribution of the burst.

inline sigkit::SymbolFrame pas_frame(const std::vector<int>& amplitudes,
                                     const std::vector<int>& signs) {
    if (amplitudes.empty() || amplitudes.size() % 4 != 0)
        throw std::invalid_argument("pas_frame: amplitude count must be a positive multiple of 4");
    if (signs.size() != amplitudes.size())
        throw std::invalid_argument("pas_frame: sign count mismatch");
    double e = 0.0;
    for (int a : amplitudes) e += static_cast<double>(a) * a;
    const double scale = std::sqrt(e / (static_cast<double>(amplitudes.size()) / 4.0));
    sigkit::SymbolFrame f;
    const std::size_t nsym = amplitudes.size() / 4;
    f.x.resize(nsym);
    f.y.resize(nsym);
    for (std::size_t s = 0; s < nsym; ++s) {
        std::array<double, 4> q{};
        for (std::size_t j = 0; j < 4; ++j) {
            const std::size_t i = 4 * s + j;
            if (signs[i] != 1 && signs[i] != -1)
                throw std::invalid_argument("pas_frame: signs must be +/-1");
            q[j] = signs[i] * static_cast<double>(amplitudes[i]) / scale;
        }
        f.x[s] = sigkit::cplx(q[0], q[1]);
        f.y[s] = sigkit::cplx(q[2], q[3]);
    }
    return f;
}

// IR = R_DM - (1 - c) * m, bits per 1D symbol. Nonpositive results mark an
// infeasible operating point.
struct InformationRate {
    double bits_per_1d = 0.0;
    bool feasible = false;
};

inline InformationRate information_rate(double dm_rate_bits_per_amp, double code_rate,
                                        int bits_per_1d) {
    if (code_rate <= 0.0 || code_rate > 1.0)
        throw std::invalid_argument("information_rate: code rate outside (0, 1]");
    const double ir = dm_rate_bits_per_amp - (1.0 - code_rate) * bits_per_1d;
    return {ir, ir > 0.0};
}

}  // namespace uplink::shaping
