#include "qpole/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "qpole/errors.hpp"
#include "qpole/rng.hpp"

namespace qpole {

std::size_t Dataset::episode_count() const {
    std::size_t n = 0;
    for (const auto &rec : records) {
        n += rec.done ? 1 : 0;
    }
    // An unterminated trailing episode still counts.
    if (!records.empty() && !records.back().done) {
        ++n;
    }
    return n;
}

Dataset generate_dataset(const WorldConfig &config, const BehaviorSpec &behavior,
                         int episodes, std::uint64_t seed) {
    config.validate();
    if (episodes < 1) {
        throw ConfigError("episodes must be >= 1");
    }
    Dataset dataset;
    for (int ep = 0; ep < episodes; ++ep) {
        Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(ep));
        PhysicalState state;
        state.p = rng.uniform(-1.0, 1.0) * behavior.start_p_span *
                  config.track_limit;
        state.p_dot = rng.uniform(-0.05, 0.05);
        state.theta = rng.uniform(-1.0, 1.0) * behavior.start_angle_span;
        state.theta_dot = rng.uniform(-0.05, 0.05);

        for (int t = 0; t < behavior.max_steps; ++t) {
            double action;
            if (rng.bernoulli(behavior.random_mix)) {
                action = rng.uniform(-1.0, 1.0);
            } else {
                action = behavior.k_theta * state.theta +
                         behavior.k_theta_dot * state.theta_dot +
                         behavior.k_p * state.p +
                         behavior.k_p_dot * state.p_dot +
                         rng.normal(0.0, behavior.action_noise);
            }
            action = std::clamp(action, -1.0, 1.0);

            const PhysicalState next = physics_step(state, action, config);
            const bool failed = std::abs(next.theta) > config.fail_angle ||
                                std::abs(next.p) > config.track_limit;
            const bool done = failed || t + 1 == behavior.max_steps;

            DatasetRecord rec;
            rec.t = t;
            rec.p = state.p;
            rec.p_dot = state.p_dot;
            rec.theta = state.theta;
            rec.theta_dot = state.theta_dot;
            rec.action = action;
            rec.reward = reward(config, next.p, next.theta, next.theta_dot);
            rec.done = done;
            dataset.records.push_back(rec);

            if (done) {
                break;
            }
            state = next;
        }
    }
    return dataset;
}

Dataset clean_dataset(const Dataset &raw, const WorldConfig &config) {
    Dataset out;
    out.records.reserve(raw.records.size());
    bool have_prev = false; // previous kept record in the current episode
    double prev_theta = 0.0;

    auto close_previous = [&] {
        if (!out.records.empty()) {
            out.records.back().done = true;
        }
        have_prev = false;
    };

    for (const auto &rec : raw.records) {
        const bool finite = std::isfinite(rec.p) && std::isfinite(rec.p_dot) &&
                            std::isfinite(rec.theta) &&
                            std::isfinite(rec.theta_dot) &&
                            std::isfinite(rec.action) &&
                            std::isfinite(rec.reward);
        bool drop = !finite || std::abs(rec.p) > config.track_limit;
        if (!drop && have_prev &&
            std::abs(wrap_angle(rec.theta - prev_theta)) >= 1.0) {
            drop = true;
        }
        if (drop) {
            close_previous();
            continue;
        }
        out.records.push_back(rec);
        if (rec.done) {
            have_prev = false;
        } else {
            have_prev = true;
            prev_theta = rec.theta;
        }
    }
    return out;
}

std::vector<std::size_t> eligible_initial_indices(const Dataset &dataset) {
    std::vector<std::size_t> eligible;
    std::size_t run = 0; // consecutive records of the current episode so far
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        ++run;
        if (run >= static_cast<std::size_t>(kInitWindow)) {
            eligible.push_back(i);
        }
        if (dataset.records[i].done) {
            run = 0;
        }
    }
    return eligible;
}

FeatureVector to_features(const std::vector<DatasetRecord> &window) {
    if (window.size() != static_cast<std::size_t>(kInitWindow)) {
        throw DataError("feature window must hold exactly 8 records");
    }
    for (std::size_t i = 0; i + 1 < window.size(); ++i) {
        if (window[i].done) {
            throw DataError("feature window crosses an episode boundary");
        }
        if (window[i + 1].t != window[i].t + 1) {
            throw DataError("feature window records are not consecutive");
        }
    }
    const auto &last = window.back();
    FeatureVector f;
    f.p = last.p;
    f.p_dot = last.p_dot;
    f.cos_theta = std::cos(last.theta);
    f.sin_theta = std::sin(last.theta);
    f.theta_dot = last.theta_dot;
    f.a_prev3 = window[window.size() - 4].action;
    f.a_prev2 = window[window.size() - 3].action;
    f.a_prev1 = window[window.size() - 2].action;
    return f;
}

FeatureVector features_at(const Dataset &dataset, std::size_t index) {
    if (index + 1 < static_cast<std::size_t>(kInitWindow) ||
        index >= dataset.records.size()) {
        throw DataError("record index has no full feature window");
    }
    std::vector<DatasetRecord> window(
        dataset.records.begin() +
            static_cast<std::ptrdiff_t>(index + 1 - kInitWindow),
        dataset.records.begin() + static_cast<std::ptrdiff_t>(index + 1));
    return to_features(window);
}

std::vector<FeatureVector> sample_initial_states(const Dataset &dataset, int n,
                                                 std::uint64_t seed) {
    if (n < 1) {
        throw ConfigError("initial state count must be >= 1");
    }
    std::vector<std::size_t> eligible = eligible_initial_indices(dataset);
    if (eligible.size() < static_cast<std::size_t>(n)) {
        throw DataError("dataset has only " + std::to_string(eligible.size()) +
                        " eligible initial states, need " + std::to_string(n));
    }
    // Partial Fisher-Yates over the eligible index list.
    Rng rng = Rng::derive(seed, /*stream_id=*/0x696e6974); // "init"
    std::vector<FeatureVector> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const std::size_t j =
            i + rng.uniform_index(eligible.size() - static_cast<std::size_t>(i));
        std::swap(eligible[static_cast<std::size_t>(i)], eligible[j]);
        out.push_back(features_at(dataset, eligible[static_cast<std::size_t>(i)]));
    }
    return out;
}

std::vector<TransitionSample> extract_transitions(const Dataset &dataset) {
    std::vector<TransitionSample> samples;
    const std::vector<std::size_t> eligible = eligible_initial_indices(dataset);
    samples.reserve(eligible.size());
    for (std::size_t idx : eligible) {
        // The successor must stay inside the episode.
        if (dataset.records[idx].done || idx + 1 >= dataset.records.size()) {
            continue;
        }
        TransitionSample sample;
        sample.s = features_at(dataset, idx);
        sample.a = dataset.records[idx].action;
        sample.s_next = features_at(dataset, idx + 1);
        samples.push_back(sample);
    }
    return samples;
}

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

void write_dataset_csv(const Dataset &dataset, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open dataset for writing: " + path);
    }
    out << "t,p,p_dot,theta,theta_dot,action,reward,done\n";
    for (const auto &rec : dataset.records) {
        out << rec.t << ',' << format_double(rec.p) << ','
            << format_double(rec.p_dot) << ',' << format_double(rec.theta)
            << ',' << format_double(rec.theta_dot) << ','
            << format_double(rec.action) << ',' << format_double(rec.reward)
            << ',' << (rec.done ? '1' : '0') << '\n';
    }
    if (!out) {
        throw DataError("short write on dataset: " + path);
    }
}

namespace {

double parse_double(const std::string &field, const std::string &path) {
    double value = 0.0;
    const char *begin = field.data();
    const char *end = begin + field.size();
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw DataError("bad float field '" + field + "' in " + path);
    }
    return value;
}

} // namespace

Dataset read_dataset_csv(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open dataset: " + path);
    }
    std::string line;
    if (!std::getline(in, line) ||
        line != "t,p,p_dot,theta,theta_dot,action,reward,done") {
        throw DataError("bad dataset header in " + path);
    }
    Dataset dataset;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) {
            fields.push_back(field);
        }
        if (fields.size() != 8) {
            throw DataError("bad record arity in " + path);
        }
        DatasetRecord rec;
        rec.t = static_cast<std::int64_t>(parse_double(fields[0], path));
        rec.p = parse_double(fields[1], path);
        rec.p_dot = parse_double(fields[2], path);
        rec.theta = parse_double(fields[3], path);
        rec.theta_dot = parse_double(fields[4], path);
        rec.action = parse_double(fields[5], path);
        rec.reward = parse_double(fields[6], path);
        if (fields[7] != "0" && fields[7] != "1") {
            throw DataError("bad done flag in " + path);
        }
        rec.done = fields[7] == "1";
        dataset.records.push_back(rec);
    }
    return dataset;
}

} // namespace qpole
