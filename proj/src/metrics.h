#pragma once

// The four MOS-prediction metrics (MSE, Pearson LCC, Spearman SRCC, Kendall
// KTAU) plus the combined per-split evaluation report. Undefined
// correlations (constant inputs, all-tied pairs) raise errors; evaluate()
// converts them to NaN fields so a degenerate model still yields a report.

#include "dataset.h"
#include "model.h"

#include <span>
#include <string>
#include <vector>

namespace salf {

double mse(std::span<const double> actual, std::span<const double> predicted);

// Pearson product-moment correlation in the raw-sums form
double lcc(std::span<const double> actual, std::span<const double> predicted);

// Pearson correlation of average ranks; equals 1 - 6*sum(d^2)/(n(n^2-1))
// when there are no ties
double srcc(std::span<const double> actual, std::span<const double> predicted);

enum class ktau_variant {
    pairs_only, // (C - D) / (C + D), tied pairs excluded
    tau_b,      // standard tie correction
};

double ktau(std::span<const double> actual, std::span<const double> predicted,
            ktau_variant variant = ktau_variant::pairs_only);

// average ranks (1-based, ties averaged); shared by srcc and its tests
std::vector<double> average_ranks(std::span<const double> values);

struct eval_report {
    double mse = 0.0;
    double lcc = 0.0;    // NaN when undefined
    double srcc = 0.0;   // NaN when undefined
    double ktau = 0.0;   // pairs_only variant, NaN when undefined
    double ktau_b = 0.0; // NaN when undefined
    std::vector<std::string> ids;
    std::vector<double> actual;
    std::vector<double> predicted;
};

// metrics over already-computed prediction pairs
eval_report make_report(std::vector<std::string> ids, std::vector<double> actual,
                        std::vector<double> predicted);

// eval-mode (clamped) predictions for the given utterances, then the metrics
eval_report evaluate(const mos_model & m, const manifest & data, std::span<const size_t> indices,
                     const cepstral_config & cfg = {});

std::string format_report_table(const eval_report & report);

// rows utterance_id,actual,predicted followed by a '#' summary line
void write_report_csv(const eval_report & report, const std::string & path);

} // namespace salf
