#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scgnet/matrix.hpp"
#include "scgnet/metrics.hpp"
#include "scgnet/model.hpp"
#include "scgnet/smote.hpp"
#include "scgnet/train.hpp"

namespace scgnet::train {

struct SmoteOptions {
  bool enabled = false;
  smote::SmoteConfig config;
};

struct FoldResult {
  std::size_t fold = 0;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  /// Dataset rows that SMOTE interpolated between for this fold.
  std::vector<std::size_t> smote_sources;
  std::size_t synthetic_rows = 0;
  FoldHistory history;
  metrics::EvalReport report;
  double val_loss = 0.0;
  std::uint32_t weight_crc = 0;
};

struct MeanStd {
  double mean = 0.0;
  /// Sample standard deviation over folds (0 for a single fold).
  double std = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return r;
}

struct CvReport {
  std::string task;
  std::vector<FoldResult> folds;
  std::vector<std::string> warnings;
  MeanStd accuracy, precision, recall, f1, val_loss;

  nlohmann::ordered_json to_json() const {
    using J = nlohmann::ordered_json;
    auto ms = [](const MeanStd& m) { return J{{"mean", m.mean}, {"std", m.std}}; };
    J folds_j = J::array();
    for (const auto& f : folds) {
      folds_j.push_back({{"fold", f.fold},
                         {"train_rows", f.train_idx.size()},
                         {"val_rows", f.val_idx.size()},
                         {"synthetic_rows", f.synthetic_rows},
                         {"val_loss", f.val_loss},
                         {"weights_crc32", io::hex32(f.weight_crc)},
                         {"history", f.history.to_json()},
                         {"report", metrics::to_json(f.report)}});
    }
    return {{"schema_version", 1},
            {"task", task},
            {"k_folds", folds.size()},
            {"aggregate",
             {{"accuracy", ms(accuracy)},
              {"precision", ms(precision)},
              {"recall", ms(recall)},
              {"f1", ms(f1)},
              {"val_loss", ms(val_loss)}}},
            {"warnings", warnings},
            {"folds", folds_j}};
  }
};

using FoldCallback = std::function<void(const FoldResult&)>;

/// Stratified k-fold cross-validation. Fold f trains a fresh model seeded
/// from (seed, f) on the other folds, oversampled with SMOTE when enabled
/// (training portion only), and scores it on fold f.
inline CvReport cross_validate(const EncodedSet& data, model::ScgnetConfig mcfg, const TrainConfig& tcfg,
                               const SmoteOptions& smote_opts, std::vector<std::string> class_names,
                               const FoldCallback& on_fold = {}) {
  tcfg.validate();
  CvReport rep;
  rep.task = model::task_name(mcfg.task());
  const auto split = stratified_kfold(data.y, tcfg.k_folds, derive_seed(tcfg.seed, 1), tcfg.clamp_folds);
  rep.warnings = split.warnings;
  std::vector<double> acc, prec, rec, f1, loss;
  for (std::size_t f = 0; f < tcfg.k_folds; ++f) {
    FoldResult fr;
    fr.fold = f;
    fr.val_idx = split.folds[f];
    fr.train_idx = complement(split, f);
    EncodedSet train = data.subset(fr.train_idx);
    const EncodedSet val = data.subset(fr.val_idx);
    if (smote_opts.enabled) {
      auto sc = smote_opts.config;
      sc.seed = derive_seed(smote_opts.config.seed, 3000 + f);
      auto bal = smote::balance_classes(train, sc);
      for (const auto& w : bal.warnings) rep.warnings.push_back("fold " + std::to_string(f) + ": " + w);
      std::set<std::size_t> sources;
      for (const auto& o : bal.origins) {
        sources.insert(fr.train_idx[o.base]);
        sources.insert(fr.train_idx[o.neighbor]);
      }
      fr.smote_sources.assign(sources.begin(), sources.end());
      fr.synthetic_rows = bal.origins.size();
      train = std::move(bal.data);
    }
    auto mc = mcfg;
    mc.seed = derive_seed(tcfg.seed, 1000 + f);
    auto tc = tcfg;
    tc.seed = derive_seed(tcfg.seed, 2000 + f);
    model::Model<float> m(mc);
    fr.history = train_model(m, train, &val, tc);
    const auto ev = evaluate(m, val, tc.batch_size);
    fr.val_loss = ev.loss;
    fr.report = metrics::make_report(rep.task, "SCGNet", "fold " + std::to_string(f),
                                     metrics::confusion(ev.predictions, val.y, static_cast<std::size_t>(data.n_classes),
                                                        class_names));
    fr.weight_crc = weight_checksum(m);
    const auto h = fr.report.headline();
    acc.push_back(fr.report.s.accuracy);
    prec.push_back(h.precision);
    rec.push_back(h.recall);
    f1.push_back(h.f1);
    loss.push_back(ev.loss);
    if (on_fold) on_fold(fr);
    rep.folds.push_back(std::move(fr));
  }
  rep.accuracy = mean_std(acc);
  rep.precision = mean_std(prec);
  rep.recall = mean_std(rec);
  rep.f1 = mean_std(f1);
  rep.val_loss = mean_std(loss);
  return rep;
}

/// Checks that every fold's validation rows are disjoint from its training
/// rows and from the rows SMOTE drew on, and that the validation folds
/// partition the dataset. Returns the problems found (empty when clean).
inline std::vector<std::string> audit_folds(const CvReport& rep, std::size_t n_rows) {
  std::vector<std::string> problems;
  std::vector<int> seen(n_rows, 0);
  for (const auto& f : rep.folds) {
    std::vector<std::size_t> overlap;
    std::set_intersection(f.train_idx.begin(), f.train_idx.end(), f.val_idx.begin(), f.val_idx.end(),
                          std::back_inserter(overlap));
    if (!overlap.empty()) problems.push_back("fold " + std::to_string(f.fold) + ": train/val overlap");
    overlap.clear();
    std::set_intersection(f.smote_sources.begin(), f.smote_sources.end(), f.val_idx.begin(), f.val_idx.end(),
                          std::back_inserter(overlap));
    if (!overlap.empty()) problems.push_back("fold " + std::to_string(f.fold) + ": SMOTE used validation rows");
    if (f.train_idx.size() + f.val_idx.size() != n_rows) {
      problems.push_back("fold " + std::to_string(f.fold) + ": train + val does not cover the dataset");
    }
    for (auto i : f.val_idx) ++seen[i];
  }
  for (std::size_t i = 0; i < n_rows; ++i) {
    if (seen[i] != 1) {
      problems.push_back("row " + std::to_string(i) + " validated " + std::to_string(seen[i]) + " times");
      break;
    }
  }
  return problems;
}

}  // namespace scgnet::train
