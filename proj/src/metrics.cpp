#include "metrics.h"

#include "error.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace salf {

namespace {

void check_pairs(std::span<const double> a, std::span<const double> p, size_t min_n) {
    if (a.size() != p.size()) {
        fail(errc::length_mismatch, "metric inputs differ in length: " + std::to_string(a.size()) +
                                        " vs " + std::to_string(p.size()));
    }
    check(a.size() >= min_n, errc::invalid_argument,
          "metric needs at least " + std::to_string(min_n) + " pairs");
    for (size_t i = 0; i < a.size(); ++i) {
        check(std::isfinite(a[i]) && std::isfinite(p[i]), errc::invalid_argument,
              "metric inputs must be finite");
    }
}

} // namespace

double mse(std::span<const double> actual, std::span<const double> predicted) {
    check_pairs(actual, predicted, 1);
    double acc = 0.0;
    for (size_t i = 0; i < actual.size(); ++i) {
        const double d = actual[i] - predicted[i];
        acc += d * d;
    }
    return acc / static_cast<double>(actual.size());
}

double lcc(std::span<const double> actual, std::span<const double> predicted) {
    check_pairs(actual, predicted, 2);
    const double n = static_cast<double>(actual.size());
    double sx = 0.0, sy = 0.0, sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < actual.size(); ++i) {
        sx += actual[i];
        sy += predicted[i];
        sxy += actual[i] * predicted[i];
        sxx += actual[i] * actual[i];
        syy += predicted[i] * predicted[i];
    }
    const double var_x = n * sxx - sx * sx;
    const double var_y = n * syy - sy * sy;
    const double scale_x = std::max(1.0, n * sxx);
    const double scale_y = std::max(1.0, n * syy);
    if (var_x <= scale_x * 1e-13 || var_y <= scale_y * 1e-13) {
        fail(errc::constant_input, "lcc undefined for a constant vector");
    }
    return (n * sxy - sx * sy) / std::sqrt(var_x * var_y);
}

std::vector<double> average_ranks(std::span<const double> values) {
    const size_t n = values.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{ 0 });
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) {
            ++j;
        }
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    return ranks;
}

double srcc(std::span<const double> actual, std::span<const double> predicted) {
    check_pairs(actual, predicted, 2);
    const auto rx = average_ranks(actual);
    const auto ry = average_ranks(predicted);
    // centered Pearson on the ranks
    const double n = static_cast<double>(rx.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double cov = 0.0, vx = 0.0, vy = 0.0;
    for (size_t i = 0; i < rx.size(); ++i) {
        cov += (rx[i] - mx) * (ry[i] - my);
        vx += (rx[i] - mx) * (rx[i] - mx);
        vy += (ry[i] - my) * (ry[i] - my);
    }
    if (vx <= 0.0 || vy <= 0.0) {
        fail(errc::constant_input, "srcc undefined when all ranks are tied");
    }
    return cov / std::sqrt(vx * vy);
}

double ktau(std::span<const double> actual, std::span<const double> predicted, ktau_variant variant) {
    check_pairs(actual, predicted, 2);
    const size_t n = actual.size();
    int64_t concordant = 0, discordant = 0;
    int64_t tied_x = 0, tied_y = 0, tied_both = 0;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            const double dx = actual[i] - actual[j];
            const double dy = predicted[i] - predicted[j];
            if (dx == 0.0 && dy == 0.0) {
                ++tied_both;
            } else if (dx == 0.0) {
                ++tied_x;
            } else if (dy == 0.0) {
                ++tied_y;
            } else if ((dx > 0.0) == (dy > 0.0)) {
                ++concordant;
            } else {
                ++discordant;
            }
        }
    }
    const double c = static_cast<double>(concordant);
    const double d = static_cast<double>(discordant);
    if (variant == ktau_variant::pairs_only) {
        if (concordant + discordant == 0) {
            fail(errc::all_tied, "ktau undefined: every pair is tied");
        }
        return (c - d) / (c + d);
    }
    const double denom_x = c + d + static_cast<double>(tied_y);
    const double denom_y = c + d + static_cast<double>(tied_x);
    if (denom_x <= 0.0 || denom_y <= 0.0) {
        fail(errc::all_tied, "ktau-b undefined: a vector is constant");
    }
    return (c - d) / std::sqrt(denom_x * denom_y);
}

eval_report make_report(std::vector<std::string> ids, std::vector<double> actual,
                        std::vector<double> predicted) {
    check(!actual.empty(), errc::empty_split, "evaluation over an empty split");
    check(ids.size() == actual.size() && actual.size() == predicted.size(), errc::length_mismatch,
          "report inputs differ in length");

    eval_report report;
    report.mse = mse(actual, predicted);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto guard = [&](auto && fn) -> double {
        if (actual.size() < 2) {
            return nan;
        }
        try {
            return fn();
        } catch (const error & e) {
            if (e.code() == errc::constant_input || e.code() == errc::all_tied) {
                return nan; // undefined, reported explicitly as NaN
            }
            throw;
        }
    };
    report.lcc = guard([&] { return lcc(actual, predicted); });
    report.srcc = guard([&] { return srcc(actual, predicted); });
    report.ktau = guard([&] { return ktau(actual, predicted, ktau_variant::pairs_only); });
    report.ktau_b = guard([&] { return ktau(actual, predicted, ktau_variant::tau_b); });
    report.ids = std::move(ids);
    report.actual = std::move(actual);
    report.predicted = std::move(predicted);
    return report;
}

eval_report evaluate(const mos_model & m, const manifest & data, std::span<const size_t> indices,
                     const cepstral_config & cfg) {
    check(!indices.empty(), errc::empty_split, "evaluation over an empty split");
    std::vector<std::string> ids;
    std::vector<double> actual;
    std::vector<std::vector<double>> rows;
    ids.reserve(indices.size());
    for (size_t i : indices) {
        check(i < data.utterances.size(), errc::invalid_argument, "evaluate: index out of range");
        const auto & u = data.utterances[i];
        ids.push_back(u.id);
        actual.push_back(u.mos);
        rows.push_back(resolve_features(u, m.kind, data.dir, cfg));
    }
    auto predicted = predict_batch(m, rows);
    return make_report(std::move(ids), std::move(actual), std::move(predicted));
}

namespace {

std::string metric_str(double v) {
    if (std::isnan(v)) {
        return "undefined";
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

} // namespace

std::string format_report_table(const eval_report & report) {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof(line), "  %-12s %s\n", "utterances", std::to_string(report.actual.size()).c_str());
    out += line;
    const std::pair<const char *, double> rows[] = {
        { "mse", report.mse },     { "lcc", report.lcc },       { "srcc", report.srcc },
        { "ktau", report.ktau },   { "ktau_b", report.ktau_b },
    };
    for (const auto & [name, value] : rows) {
        std::snprintf(line, sizeof(line), "  %-12s %s\n", name, metric_str(value).c_str());
        out += line;
    }
    return out;
}

void write_report_csv(const eval_report & report, const std::string & path) {
    std::FILE * f = std::fopen(path.c_str(), "wb");
    if (f == nullptr) {
        fail(errc::io_failure, "cannot open '" + path + "' for writing");
    }
    std::fprintf(f, "utterance_id,actual,predicted\n");
    for (size_t i = 0; i < report.actual.size(); ++i) {
        std::fprintf(f, "%s,%.10g,%.10g\n", report.ids[i].c_str(), report.actual[i], report.predicted[i]);
    }
    std::fprintf(f, "# mse=%.10g lcc=%.10g srcc=%.10g ktau=%.10g ktau_b=%.10g\n", report.mse,
                 report.lcc, report.srcc, report.ktau, report.ktau_b);
    if (std::fclose(f) != 0) {
        fail(errc::io_failure, "write error on '" + path + "'");
    }
}

} // namespace salf
