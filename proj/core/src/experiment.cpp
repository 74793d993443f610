#include "cmim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "cmim/augment.hpp"
#include "cmim/svg.hpp"

namespace cmim {
namespace {

// Independent generator streams derived from the run seed.
enum Stream : std::uint64_t {
  kInitStream = 1,
  kBatchStream = 2,
  kNoiseStream = 3,
  kAugmentStream = 4,
  kValidationStream = 5,
  kProbeStream = 6,
};

Matrix standard_normals(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> n;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

std::uint64_t parse_u64(const std::string& s, const std::string& spec) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("bad dataset spec '" + spec + "'");
  }
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

std::filesystem::path data_root_from_env() {
  if (const char* root = std::getenv("CMIM_DATA_ROOT"); root && *root) return root;
  return "data";
}

std::string canonical_dataset_spec(const std::string& spec, const RunConfig& c) {
  const auto parts = split(spec, ':');
  if (parts.size() == 2 && parts[0] == "synth_blobs") {
    return spec + ":" + std::to_string(c.synth_classes) + "x" + std::to_string(c.synth_per_class) +
           ":" + std::to_string(c.synth_side) + ":" + format_number(c.synth_jitter) + ":" +
           format_number(c.synth_noise);
  }
  return spec;
}

Dataset load_dataset(const std::string& spec, const RunConfig& config,
                     const std::filesystem::path& data_root) {
  const auto parts = split(canonical_dataset_spec(spec, config), ':');
  if (parts.size() == 6 && parts[0] == "synth_blobs") {
    const auto shape = split(parts[2], 'x');
    if (shape.size() != 2) throw DataError("bad dataset spec '" + spec + "'");
    BlobStyle style;
    try {
      style.jitter = std::stod(parts[4]);
      style.pixel_noise = std::stod(parts[5]);
    } catch (const std::exception&) {
      throw DataError("bad dataset spec '" + spec + "'");
    }
    Dataset ds = synth_blobs(static_cast<int>(parse_u64(shape[0], spec)),
                             static_cast<int>(parse_u64(shape[1], spec)),
                             static_cast<int>(parse_u64(parts[3], spec)), parse_u64(parts[1], spec),
                             {}, style);
    ds.validate();
    return ds;
  }
  if (parts.size() == 2 && parts[0] == "idx") {
    const auto manifest = data_root / "manifest.csv";
    for (const auto& entry : read_manifest(manifest)) {
      if (entry.name == parts[1]) {
        Dataset ds = load_idx_dataset(entry, data_root);
        ds.validate();
        return ds;
      }
    }
    throw DataError("dataset '" + parts[1] + "' not listed in " + manifest.string());
  }
  throw DataError("unrecognised dataset spec '" + spec +
                  "' (expected synth_blobs:<seed> or idx:<name>)");
}

std::string dataset_tag(const std::string& spec) {
  std::string out = spec;
  for (char& ch : out)
    if (ch == ':' || ch == '/' || ch == '\\' || ch == ' ') ch = '_';
  return out;
}

// ---------------------------------------------------------------------------
// Training.

LossBreakdown validation_loss(const ModelBundle& model, const Dataset& ds, std::uint64_t seed) {
  if (ds.val.size() < 2) throw DataError("validation split needs at least two samples");
  Rng rng(derive_seed(seed, kValidationStream));
  MinibatchInputs in;
  in.x = ds.rows(ds.val);
  const auto b = in.x.rows();
  in.noise = standard_normals(b, model.dims.latent_dim, rng);
  in.positive_noise = standard_normals(b, model.dims.latent_dim, rng);
  in.augmented_x = ds.image_side > 0 ? augment_rows(in.x, ds.image_side, {}, rng) : in.x;
  return minibatch_loss(model, in).loss;
}

TrainOutcome train_model(const RunConfig& config, const Dataset& ds, const std::string& run_name) {
  config.validate();
  if (ds.train.size() < static_cast<std::size_t>(config.batch_size)) {
    throw DataError("training split smaller than one batch");
  }
  const ModelDims dims{ds.input_dim(), config.latent_dim, config.hidden};
  Rng init_rng(derive_seed(config.seed, kInitStream));
  Rng noise_rng(derive_seed(config.seed, kNoiseStream));
  Rng aug_rng(derive_seed(config.seed, kAugmentStream));
  const std::uint64_t batch_seed = derive_seed(config.seed, kBatchStream);

  ModelBundle model = ModelBundle::create(config.variant, dims, config.tau, init_rng);
  const AdamConfig adam_cfg{config.lr, 0.9, 0.999, 1e-8};
  AdamState enc_opt(model.encoder.num_parameters(), adam_cfg);
  AdamState dec_opt(model.decoder ? model.decoder->num_parameters() : 0, adam_cfg);
  const WsdSchedule schedule{config.total_steps, config.warmup_frac, config.decay_frac};
  const bool augment = config.augment && ds.image_side > 0;

  CheckpointMeta meta;
  meta.variant = config.variant;
  meta.dims = dims;
  meta.tau = config.tau;
  meta.seed = config.seed;
  meta.batch_size = config.batch_size;
  meta.dataset = canonical_dataset_spec(config.dataset, config);
  meta.run_name = run_name;

  TrainOutcome out{model, model, meta, meta, {}, {}, {}};
  double best = INFINITY;
  double loss_sum = 0.0;
  long loss_count = 0;

  std::uint64_t epoch = 0;
  std::vector<std::vector<std::size_t>> blocks;
  std::size_t next_block = 0;

  for (long step = 1; step <= config.total_steps; ++step) {
    if (next_block == blocks.size()) {
      blocks = batches(ds.train, static_cast<std::size_t>(config.batch_size), batch_seed, epoch++, true);
      next_block = 0;
    }
    const Matrix clean = ds.rows(blocks[next_block++]);
    MinibatchInputs in;
    in.x = augment ? augment_rows(clean, ds.image_side, {}, aug_rng) : clean;
    if (config.variant == Variant::InfoNCE) {
      in.augmented_x = ds.image_side > 0 ? augment_rows(clean, ds.image_side, {}, aug_rng) : clean;
    }
    in.noise = standard_normals(in.x.rows(), dims.latent_dim, noise_rng);
    if (config.variant == Variant::InfoNCE) {
      in.positive_noise = standard_normals(in.x.rows(), dims.latent_dim, noise_rng);
    }

    const double mult = schedule.multiplier(step - 1);
    try {
      const ObjectiveResult res = minibatch_loss(model, in);
      enc_opt.step(model.encoder.parameters(), res.grads.encoder, mult);
      if (model.decoder) dec_opt.step(model.decoder->parameters(), res.grads.decoder, mult);
      loss_sum += res.loss.total;
      ++loss_count;
    } catch (const DivergenceError& e) {
      throw DivergenceError(std::string(e.what()) + " (run " + run_name + ")", step);
    }

    if (step % config.val_interval == 0 || step == config.total_steps) {
      const LossBreakdown val = validation_loss(model, ds, config.seed);
      if (!std::isfinite(val.total)) throw DivergenceError("non-finite validation loss", step);
      out.log.push_back({step, loss_sum / static_cast<double>(loss_count), mult, val});
      loss_sum = 0.0;
      loss_count = 0;
      if (val.total < best) {
        best = val.total;
        out.best = model;
        out.best_meta.step = step;
        out.best_meta.val_loss = val.total;
        out.best_val = val;
      }
      if (step == config.total_steps) {
        out.last = model;
        out.last_meta.step = step;
        out.last_meta.val_loss = val.total;
        out.last_val = val;
      }
    }
  }
  return out;
}

namespace {

void write_train_log(const std::filesystem::path& path, const std::vector<TrainLogRow>& rows) {
  auto log = open_out(path);
  log << "step,lr_multiplier,train_loss,val_loss,val_recon,val_contrastive,val_kl\n";
  for (const auto& r : rows) {
    log << r.step << ',' << format_number(r.lr_multiplier) << ',' << format_number(r.train_loss)
        << ',' << format_number(r.val.total) << ',' << format_number(r.val.recon) << ','
        << format_number(r.val.contrastive) << ',' << format_number(r.val.kl) << '\n';
  }
}

}  // namespace

std::filesystem::path cmd_train(const RunConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  const Dataset ds = load_dataset(config.dataset, config, data_root_from_env());
  const TrainOutcome t = train_model(config, ds, std::string(variant_name(config.variant)));

  std::filesystem::create_directories(out_dir);
  save_config(out_dir / "config.txt", config);
  const auto best = out_dir / "best.cmm";
  save_checkpoint(best, t.best, t.best_meta);
  save_checkpoint(out_dir / "final.cmm", t.last, t.last_meta);

  write_train_log(out_dir / "train_log.csv", t.log);
  return best;
}

// ---------------------------------------------------------------------------
// Evaluation.

std::string_view classifier_name(Classifier c) noexcept {
  switch (c) {
    case Classifier::knn5_cosine: return "knn5_cosine";
    case Classifier::knn5_euclidean: return "knn5_euclidean";
    case Classifier::mlp: return "mlp";
  }
  return "?";
}

std::string EvalSetting::name() const {
  return std::string(classifier_name(classifier)) + "/" + std::string(embedding_kind_name(kind));
}

const std::vector<EvalSetting>& eval_settings() {
  static const std::vector<EvalSetting> s = {
      {Classifier::knn5_cosine, EmbeddingKind::mean_encoding},
      {Classifier::knn5_euclidean, EmbeddingKind::mean_encoding},
      {Classifier::mlp, EmbeddingKind::mean_encoding},
      {Classifier::knn5_cosine, EmbeddingKind::informative},
      {Classifier::knn5_euclidean, EmbeddingKind::informative},
      {Classifier::mlp, EmbeddingKind::informative},
  };
  return s;
}

std::vector<EvalRun> evaluate_model(const ModelForEval& m, const Dataset& ds, long probe_steps) {
  if (ds.input_dim() != m.model.dims.input_dim) {
    throw DataError("checkpoint expects input dim " + std::to_string(m.model.dims.input_dim) +
                    " but dataset " + ds.name + " has " + std::to_string(ds.input_dim()));
  }
  const Matrix train_x = ds.rows(ds.train);
  const Matrix test_x = ds.rows(ds.test);
  const auto train_y = ds.labels_of(ds.train);
  const auto test_y = ds.labels_of(ds.test);
  MlpProbeConfig probe;
  probe.steps = probe_steps;

  std::vector<EvalRun> runs;
  for (EmbeddingKind kind : {EmbeddingKind::mean_encoding, EmbeddingKind::informative}) {
    if (!supports(m.model, kind)) continue;
    const Matrix tr = embed(m.model, train_x, kind);
    const Matrix te = embed(m.model, test_x, kind);
    for (const auto& s : eval_settings()) {
      if (s.kind != kind) continue;
      EvalRun r;
      r.model = m.meta.run_name;
      r.variant = m.meta.variant;
      r.batch_size = m.meta.batch_size;
      r.seed = m.meta.seed;
      r.dataset = m.meta.dataset;
      r.setting = s;
      switch (s.classifier) {
        case Classifier::knn5_cosine: r.accuracy = knn5(tr, train_y, te, test_y, KnnMetric::cosine); break;
        case Classifier::knn5_euclidean:
          r.accuracy = knn5(tr, train_y, te, test_y, KnnMetric::euclidean);
          break;
        case Classifier::mlp:
          r.accuracy = mlp_probe(tr, train_y, te, test_y,
                                 derive_seed(m.meta.seed, kProbeStream + static_cast<int>(kind)), probe);
          break;
      }
      runs.push_back(r);
    }
  }
  return runs;
}

std::vector<EvalCell> aggregate_runs(const std::vector<EvalRun>& runs) {
  using Key = std::tuple<std::string, std::string, std::string, int>;  // dataset, setting, model, batch
  std::map<Key, std::vector<const EvalRun*>> groups;
  for (const auto& r : runs) groups[{r.dataset, r.setting.name(), r.model, r.batch_size}].push_back(&r);

  std::vector<EvalCell> cells;
  for (const auto& [key, members] : groups) {
    EvalCell c;
    c.dataset = std::get<0>(key);
    c.model = std::get<2>(key);
    c.batch_size = std::get<3>(key);
    c.variant = members.front()->variant;
    c.setting = members.front()->setting;
    std::vector<double> acc;
    for (const auto* m : members) acc.push_back(m->accuracy);
    c.accuracy = mean_of(acc);
    c.accuracy_sd = sample_sd(acc);
    c.seeds = static_cast<int>(acc.size());
    cells.push_back(c);
  }

  // z-scores and ranks within each (dataset, setting) population.
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> pops;
  for (std::size_t i = 0; i < cells.size(); ++i) pops[{cells[i].dataset, cells[i].setting.name()}].push_back(i);
  for (const auto& [key, idx] : pops) {
    std::vector<double> acc;
    for (auto i : idx) acc.push_back(cells[i].accuracy);
    const auto z = zscore_table(acc);
    const auto rk = rank_table(acc);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      cells[idx[k]].z = z[k];
      cells[idx[k]].rank = rk[k];
    }
  }
  return cells;
}

void write_eval_outputs(const EvalReport& report, const RunConfig& config,
                        const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    auto o = open_out(out_dir / "eval_report.csv");
    o << "# " << preset_banner(config.preset) << '\n';
    o << "model,variant,batch_size,dataset,classifier,embedding_kind,accuracy,z,rank\n";
    for (const auto& c : report.cells) {
      o << c.model << ',' << variant_name(c.variant) << ',' << c.batch_size << ',' << c.dataset << ','
        << classifier_name(c.setting.classifier) << ',' << embedding_kind_name(c.setting.kind) << ','
        << format_number(c.accuracy) << ',' << format_number(c.z) << ',' << format_number(c.rank)
        << '\n';
    }
  }
  {
    auto o = open_out(out_dir / "eval_runs.csv");
    o << "model,variant,batch_size,seed,dataset,classifier,embedding_kind,accuracy\n";
    for (const auto& r : report.runs) {
      o << r.model << ',' << variant_name(r.variant) << ',' << r.batch_size << ',' << r.seed << ','
        << r.dataset << ',' << classifier_name(r.setting.classifier) << ','
        << embedding_kind_name(r.setting.kind) << ',' << format_number(r.accuracy) << '\n';
    }
  }

  // Accuracy bars per dataset: categories are settings, series are model@batch.
  std::vector<std::string> settings;
  for (const auto& s : eval_settings()) settings.push_back(s.name());
  std::set<std::string> datasets;
  for (const auto& c : report.cells) datasets.insert(c.dataset);
  for (const auto& d : datasets) {
    std::map<std::string, BarSeries> series;
    for (const auto& c : report.cells) {
      if (c.dataset != d) continue;
      const std::string label = c.model + " b" + std::to_string(c.batch_size);
      auto& s = series[label];
      if (s.mean.empty()) {
        s.name = label;
        s.mean.assign(settings.size(), NAN);
        s.error.assign(settings.size(), 0.0);
      }
      const auto pos = static_cast<std::size_t>(
          std::find(settings.begin(), settings.end(), c.setting.name()) - settings.begin());
      s.mean[pos] = c.accuracy;
      s.error[pos] = c.accuracy_sd;
    }
    std::vector<BarSeries> list;
    for (auto& [k, s] : series) list.push_back(std::move(s));
    auto o = open_out(out_dir / ("eval_accuracy_" + dataset_tag(d) + ".svg"));
    o << bar_chart_svg("accuracy on " + d + " (" + std::string(preset_name(config.preset)) + ")",
                       settings, list, "test accuracy");
  }

  // Average z-score per model and batch size, error bar = sd over (dataset, setting).
  std::map<std::string, std::map<int, std::vector<double>>> zs;
  std::set<int> batch_set;
  for (const auto& c : report.cells) {
    zs[c.model][c.batch_size].push_back(c.z);
    batch_set.insert(c.batch_size);
  }
  std::vector<std::string> cats;
  for (int b : batch_set) cats.push_back("batch " + std::to_string(b));
  std::vector<BarSeries> zseries;
  for (const auto& [model, by_b] : zs) {
    BarSeries s;
    s.name = model;
    for (int b : batch_set) {
      const auto it = by_b.find(b);
      s.mean.push_back(it == by_b.end() ? NAN : mean_of(it->second));
      s.error.push_back(it == by_b.end() ? 0.0 : sample_sd(it->second));
    }
    zseries.push_back(std::move(s));
  }
  auto o = open_out(out_dir / "eval_zscore.svg");
  o << bar_chart_svg("average z-score (" + std::string(preset_name(config.preset)) + ")", cats, zseries,
                     "z-score");
}

EvalReport cmd_eval(const std::vector<std::filesystem::path>& checkpoints, const RunConfig& config,
                    const std::filesystem::path& out_dir) {
  if (checkpoints.empty()) throw ConfigError("eval needs at least one checkpoint");
  const auto root = data_root_from_env();
  std::map<std::string, Dataset> cache;
  EvalReport report;
  for (const auto& path : checkpoints) {
    if (!std::filesystem::exists(path)) throw CheckpointError("missing checkpoint " + path.string());
    Checkpoint ck = load_checkpoint(path);
    auto it = cache.find(ck.meta.dataset);
    if (it == cache.end()) it = cache.emplace(ck.meta.dataset, load_dataset(ck.meta.dataset, config, root)).first;
    auto runs = evaluate_model({ck.meta, std::move(ck.model)}, it->second, config.probe_steps);
    report.runs.insert(report.runs.end(), runs.begin(), runs.end());
  }
  report.cells = aggregate_runs(report.runs);
  write_eval_outputs(report, config, out_dir);
  return report;
}

// ---------------------------------------------------------------------------
// Batch-size sensitivity.

SensitivityResult sensitivity_from_report(EvalReport report) {
  SensitivityResult res;
  using Key = std::tuple<std::string, std::string, std::string>;  // model, dataset, setting
  std::map<Key, std::vector<XY>> points;
  for (const auto& c : report.cells) {
    points[{c.model, c.dataset, c.setting.name()}].push_back(
        {static_cast<double>(c.batch_size), c.z});
  }
  std::map<std::string, std::vector<double>> per_model;
  for (const auto& [key, pts] : points) {
    std::set<double> xs;
    for (const auto& p : pts) xs.insert(p.x);
    if (xs.size() < 2) {
      throw ConfigError("model " + std::get<0>(key) + " needs at least two batch sizes on " +
                        std::get<1>(key));
    }
    const double slope = batch_size_slope(pts);
    res.slopes.push_back({std::get<0>(key), std::get<2>(key), std::get<1>(key), slope});
    per_model[std::get<0>(key)].push_back(slope);
  }
  for (const auto& [model, slopes] : per_model) {
    SlopeStats st;
    try {
      st = slopes_ttest(slopes);
    } catch (const DomainError&) {
      // Degenerate (all slopes identical): report the mean with an undefined test.
      st.mean_slope = slopes.front();
      st.sd = 0.0;
      st.t = NAN;
      st.p = NAN;
      st.n = slopes.size();
    }
    res.summary[model] = st;
  }
  res.report = std::move(report);
  return res;
}

SensitivityResult cmd_sensitivity(const RunConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  const auto root = data_root_from_env();
  std::filesystem::create_directories(out_dir);
  save_config(out_dir / "config.txt", config);

  EvalReport report;
  for (const auto& spec : config.grid_datasets) {
    const Dataset ds = load_dataset(spec, config, root);
    for (Variant v : config.grid_variants) {
      for (int b : config.grid_batch_sizes) {
        for (int k = 0; k < config.grid_seeds; ++k) {
          RunConfig run = config;
          run.variant = v;
          run.dataset = spec;
          run.batch_size = b;
          run.seed = config.seed + static_cast<std::uint64_t>(k);
          const std::string name = std::string(variant_name(v));
          const TrainOutcome t = train_model(run, ds, name);
          const auto dir = out_dir / "runs" / dataset_tag(spec) /
                           (name + "_b" + std::to_string(b) + "_s" + std::to_string(run.seed));
          std::filesystem::create_directories(dir);
          save_checkpoint(dir / "best.cmm", t.best, t.best_meta);
          write_train_log(dir / "train_log.csv", t.log);
          auto runs = evaluate_model({t.best_meta, t.best}, ds, config.probe_steps);
          report.runs.insert(report.runs.end(), runs.begin(), runs.end());
        }
      }
    }
  }
  report.cells = aggregate_runs(report.runs);
  write_eval_outputs(report, config, out_dir);

  SensitivityResult res = sensitivity_from_report(std::move(report));
  {
    auto o = open_out(out_dir / "sensitivity_slopes.csv");
    o << "# " << preset_banner(config.preset) << '\n';
    o << "model,setting,dataset,slope\n";
    for (const auto& s : res.slopes) {
      o << s.model << ',' << s.setting << ',' << s.dataset << ',' << format_number(s.slope) << '\n';
    }
  }
  {
    auto o = open_out(out_dir / "sensitivity_summary.csv");
    o << "# " << preset_banner(config.preset) << '\n';
    o << "model,mean_slope,sd,t,p,n\n";
    for (const auto& [model, st] : res.summary) {
      o << model << ',' << format_number(st.mean_slope) << ',' << format_number(st.sd) << ','
        << format_number(st.t) << ',' << format_number(st.p) << ',' << st.n << '\n';
    }
  }
  {
    auto o = open_out(out_dir / "sensitivity_table.txt");
    o << preset_banner(config.preset) << "\n\n";
    o << "Two-sided t-test of average slope != 0 (z-score vs batch size)\n";
    char line[160];
    std::snprintf(line, sizeof line, "%-12s %14s %10s %10s %5s\n", "model", "mean slope", "t", "p-value", "n");
    o << line;
    for (const auto& [model, st] : res.summary) {
      std::snprintf(line, sizeof line, "%-12s %14.6g %10.4g %10.4g %5zu%s\n", model.c_str(), st.mean_slope,
                    st.t, st.p, st.n, st.p < 0.05 ? "  *" : "");
      o << line;
    }
    o << "\n* p < 0.05\n";
  }
  {
    std::vector<SlopeGroup> groups;
    std::map<std::string, std::vector<double>> by_model;
    for (const auto& s : res.slopes) by_model[s.model].push_back(s.slope);
    for (auto& [m, v] : by_model) groups.push_back({m, std::move(v)});
    auto o = open_out(out_dir / "sensitivity_slopes.svg");
    o << slope_distribution_svg("slope of z-score vs batch size (" + std::string(preset_name(config.preset)) + ")",
                                groups);
  }
  return res;
}

ToyTrajectory cmd_toy2d(const RunConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  ToyConfig tc;
  tc.steps = config.toy_steps;
  tc.lr = config.toy_lr;
  tc.tau = config.toy_tau;
  tc.snapshot_steps = config.toy_snapshots;
  ToyTrajectory t = run_toy(make_toy2d(config.seed), tc);
  std::filesystem::create_directories(out_dir);
  save_config(out_dir / "config.txt", config);
  write_toy_outputs(t, out_dir);
  return t;
}

}  // namespace cmim
