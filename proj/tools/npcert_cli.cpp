// npcert: train, certify, and report on nearest prototype classifiers.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "npcert/npcert.hpp"
#include "npcert/oracle.hpp"

namespace {

using namespace npcert;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitSolver = 3;

Norm parse_norm(const std::string& s, bool allow_embedded = true) {
  if (s == "l1") return Norm::L1;
  if (s == "l2") return Norm::L2;
  if (s == "linf") return Norm::Linf;
  if (allow_embedded && (s == "embedded-l2" || s == "embedded_l2")) return Norm::EmbeddedL2;
  throw CLI::ValidationError("--", "unknown norm '" + s + "'");
}

DomainKind parse_domain(const std::string& s) {
  if (s == "unbounded") return DomainKind::Unbounded;
  if (s == "unit-box" || s == "unit_box") return DomainKind::UnitBox;
  if (s == "sphere-product" || s == "sphere_product") return DomainKind::SphereProduct;
  throw CLI::ValidationError("--domain", "unknown domain '" + s + "'");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Merge a JSON config file: each key supplies a default for the matching
// long option unless it was given explicitly on the command line.
void apply_config(CLI::App& app, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("config is not valid JSON: ") + e.what());
  }
  for (const auto& [key, value] : j.items()) {
    CLI::Option* opt = app.get_option_no_throw("--" + key);
    if (opt == nullptr) throw IoError("config key '" + key + "' is not a known option");
    if (opt->count() > 0) continue;  // explicit flag wins
    std::vector<std::string> args;
    if (value.is_array()) {
      for (const auto& v : value) args.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    } else {
      args.push_back(value.is_string() ? value.get<std::string>() : value.dump());
    }
    for (const auto& a : args) opt->add_result(a);
    opt->run_callback();
  }
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data, out = "model.json", trace, config;
  std::string metric = "l2", threat, init = "kmeans", optimizer = "adam", domain = "unbounded";
  std::size_t ppc = 1, epochs = 200, batch = 0, augment_shift = 0, image_side = 0;
  double cap = 1.0, lr = 0.01, lr_decay = 0.95;
  std::uint64_t seed = 0;
};

int run_train(const TrainArgs& a) {
  const Norm metric = parse_norm(a.metric, false);
  if (metric != Norm::L2 && metric != Norm::Linf) {
    std::cerr << "error: training supports l2/linf only\n";
    return kExitUsage;
  }
  const Norm q = a.threat.empty() ? metric : parse_norm(a.threat, false);

  Dataset data = load_dataset_csv(a.data);
  TrainConfig cfg;
  cfg.prototypes_per_class = a.ppc;
  cfg.margin_cap = a.cap;
  cfg.metric = metric;
  cfg.learning_rate = a.lr;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch == 0 ? std::min<std::size_t>(256, data.size()) : a.batch;
  cfg.lr_decay = a.lr_decay;
  cfg.init = a.init == "samples" ? InitScheme::RandomSamples : InitScheme::KMeans;
  cfg.seed = a.seed;
  cfg.optimizer = a.optimizer == "sgd" ? Optimizer::Sgd : Optimizer::Adam;
  cfg.augment_shift = a.augment_shift;
  cfg.image_side = a.image_side;

  TrainResult result = train(data, cfg, q);
  result.model.domain.kind = parse_domain(a.domain);
  save_model(result.model, a.out);
  if (!a.trace.empty()) {
    std::ofstream os(a.trace);
    if (!os) throw IoError("cannot open '" + a.trace + "' for writing");
    os << "epoch,objective,clean_accuracy\n";
    for (const auto& row : result.trace)
      os << row.epoch << ',' << fmt(row.objective) << ',' << fmt(row.clean_accuracy) << "\n";
  }
  std::printf("model=%s\n", a.out.c_str());
  std::printf("clean_accuracy=%s\n", fmt(result.trace.back().clean_accuracy).c_str());
  std::printf("objective=%s\n", fmt(result.trace.back().objective).c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// certify
// ---------------------------------------------------------------------------

struct CertifyArgs {
  std::string model, data, out, config;
  std::string threat = "l2", mode = "lower", domain;
  std::vector<double> radii;
  std::optional<double> cap;
  std::size_t jobs = 1, attack_budget = 0;
};

int run_certify(const CertifyArgs& a) {
  PrototypeModel model = load_model(a.model);
  if (!a.domain.empty()) model.domain.kind = parse_domain(a.domain);

  Dataset data;
  std::optional<EmbeddedDataset> embedded;
  if (model.metric == Norm::EmbeddedL2 && has_suffix(a.data, ".emb")) {
    embedded = load_embedded_binary(a.data);
    data = std::move(embedded->data);
  } else {
    data = load_dataset_csv(a.data);
  }

  ThreatSpec threat;
  threat.q = parse_norm(a.threat);
  threat.radius_cap = a.cap;
  const CertifyMode mode = a.mode == "exact" ? CertifyMode::Exact : CertifyMode::LowerBoundOnly;

  BoundReport report = certify_dataset(model, data, threat, mode, a.radii, a.jobs);

  std::optional<double> attack_mean;
  if (a.attack_budget > 0) {
    double sum = 0;
    std::size_t n = 0;
    for (auto& out : report.points) {
      if (!out.ok) continue;
      const auto ub =
          oracle::attack_upper_bound(model, data.point(out.index), data.labels[out.index],
                                     threat, a.attack_budget);
      if (ub) {
        if (!out.cert.upper_bound || *ub < *out.cert.upper_bound) out.cert.upper_bound = *ub;
        sum += *out.cert.upper_bound;
        ++n;
      }
    }
    if (n > 0) attack_mean = sum / double(n);
  }

  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out);
    if (!file) throw IoError("cannot open '" + a.out + "' for writing");
    os = &file;
  }
  *os << "index,label,predicted,lower_bound,exact,upper_bound,shortcut,subproblems,time_s,error\n";
  for (const auto& out : report.points) {
    *os << out.index << ',' << data.labels[out.index] << ',';
    if (out.ok) {
      const auto& c = out.cert;
      *os << c.label_predicted << ',' << fmt(c.lower_bound) << ','
          << (c.exact ? fmt(*c.exact) : "") << ',' << (c.upper_bound ? fmt(*c.upper_bound) : "")
          << ',' << int(c.diagnostics.shortcut_hit) << ',' << c.diagnostics.subproblems_solved
          << ',' << fmt(c.diagnostics.wall_time) << ',';
    } else {
      std::string msg = out.error;
      for (char& ch : msg)
        if (ch == ',' || ch == '\n') ch = ';';
      *os << ",,,,,,," << msg;
    }
    *os << "\n";
  }

  // Summary: clean accuracy, certified robust accuracy per radius, mean bounds.
  std::printf("points=%zu failures=%zu\n", report.num_points, report.num_failures);
  std::printf("clean_accuracy=%s\n", fmt(report.clean_accuracy).c_str());
  for (std::size_t r = 0; r < report.radii.size(); ++r)
    std::printf("CRA@%g=%s\n", report.radii[r], fmt(report.certified_robust_accuracy[r]).c_str());

  const Norm p = model.metric;
  if (p == threat.q && p != Norm::EmbeddedL2) {
    double sum = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const ClassMargins m = class_margins(model, data.point(i), data.labels[i]);
      sum += semimetric_bound(m.dist_own, m.dist_other);
    }
    std::printf("mean_semimetric_bound=%s\n", fmt(sum / double(data.size())).c_str());
  }
  {
    auto mean_lower = [&](DomainKind kind) {
      PrototypeModel m2 = model;
      m2.domain.kind = kind;
      BoundReport rep =
          certify_dataset(m2, data, threat, CertifyMode::LowerBoundOnly, {}, a.jobs);
      double sum = 0;
      std::size_t n = 0;
      for (const auto& out : rep.points) {
        if (out.ok && std::isfinite(out.cert.lower_bound)) {
          sum += out.cert.lower_bound;
          ++n;
        }
      }
      return n ? sum / double(n) : 0.0;
    };
    if (model.metric != Norm::EmbeddedL2)
      std::printf("mean_pairwise_bound=%s\n", fmt(mean_lower(DomainKind::Unbounded)).c_str());
    if (model.domain.kind == DomainKind::UnitBox)
      std::printf("mean_pairwise_bound_box=%s\n", fmt(mean_lower(DomainKind::UnitBox)).c_str());
    if (model.metric == Norm::EmbeddedL2)
      std::printf("mean_pairwise_bound_sphere=%s\n",
                  fmt(mean_lower(DomainKind::SphereProduct)).c_str());
  }
  if (mode == CertifyMode::Exact) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& out : report.points) {
      if (out.ok && out.cert.exact && std::isfinite(*out.cert.exact)) {
        sum += *out.cert.exact;
        ++n;
      }
    }
    if (n) std::printf("mean_exact=%s\n", fmt(sum / double(n)).c_str());
  }
  if (attack_mean) std::printf("mean_attack_upper=%s\n", fmt(*attack_mean).c_str());
  double total_time = 0;
  for (const auto& out : report.points)
    if (out.ok) total_time += out.cert.diagnostics.wall_time;
  if (report.num_points > 0)
    std::printf("mean_time_s=%s\n", fmt(total_time / double(report.num_points)).c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// curve
// ---------------------------------------------------------------------------

struct CurveArgs {
  std::string model, data, out, config;
  std::string threat = "l2", mode = "lower", bound = "plain";
  double rmin = 0, rmax = 1;
  std::size_t steps = 10;
  std::size_t jobs = 1;
};

int run_curve(const CurveArgs& a) {
  PrototypeModel model = load_model(a.model);
  Dataset data;
  if (model.metric == Norm::EmbeddedL2 && has_suffix(a.data, ".emb")) {
    data = load_embedded_binary(a.data).data;
  } else {
    data = load_dataset_csv(a.data);
  }

  ThreatSpec threat;
  threat.q = parse_norm(a.threat);
  const CertifyMode mode = a.mode == "exact" ? CertifyMode::Exact : CertifyMode::LowerBoundOnly;

  std::vector<double> radii;
  for (std::size_t k = 0; k < a.steps; ++k) {
    radii.push_back(a.steps == 1 ? a.rmin
                                 : a.rmin + (a.rmax - a.rmin) * double(k) / double(a.steps - 1));
  }

  const bool sphere_model = model.metric == Norm::EmbeddedL2;
  const bool want_dual = sphere_model && a.bound.find("dual") != std::string::npos;
  const bool want_box = !sphere_model && model.domain.kind == DomainKind::UnitBox;

  auto run_pass = [&](DomainKind kind) {
    PrototypeModel m2 = model;
    m2.domain.kind = kind;
    return certify_dataset(m2, data, threat, mode, radii, a.jobs);
  };

  BoundReport plain = run_pass(sphere_model ? DomainKind::Unbounded : DomainKind::Unbounded);
  std::optional<BoundReport> second;
  if (want_box) second = run_pass(DomainKind::UnitBox);
  if (want_dual) second = run_pass(DomainKind::SphereProduct);

  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out);
    if (!file) throw IoError("cannot open '" + a.out + "' for writing");
    os = &file;
  }
  *os << "radius,cra";
  if (want_box) *os << ",cra_box";
  if (want_dual) *os << ",cra_sphere";
  *os << "\n";
  for (std::size_t r = 0; r < radii.size(); ++r) {
    *os << fmt(radii[r]) << ',' << fmt(plain.certified_robust_accuracy[r]);
    if (second) *os << ',' << fmt(second->certified_robust_accuracy[r]);
    *os << "\n";
  }
  std::printf("points=%zu clean_accuracy=%s\n", plain.num_points,
              fmt(plain.clean_accuracy).c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string images, labels, csv, out = "dataset.csv", config;
};

int run_ingest(const IngestArgs& a) {
  Dataset data;
  if (!a.images.empty() || !a.labels.empty()) {
    if (a.images.empty() || a.labels.empty()) {
      std::cerr << "error: --images and --labels must be given together\n";
      return kExitUsage;
    }
    data = load_dataset_idx(a.images, a.labels);
  } else if (!a.csv.empty()) {
    data = load_dataset_csv(a.csv);
  } else {
    std::cerr << "error: provide --images/--labels or --csv\n";
    return kExitUsage;
  }
  save_dataset_csv(data, a.out);
  std::vector<std::size_t> counts(data.num_classes, 0);
  for (std::uint32_t c : data.labels) ++counts[c];
  std::printf("out=%s\n", a.out.c_str());
  std::printf("points=%zu dim=%zu classes=%zu\n", data.size(), data.dim, data.num_classes);
  for (std::size_t c = 0; c < counts.size(); ++c)
    std::printf("class_%zu=%zu\n", c, counts[c]);
  return 0;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"certification and certified training for nearest prototype classifiers"};
  app.require_subcommand(1);

  TrainArgs ta;
  CLI::App* train_cmd = app.add_subcommand("train", "train a prototype model");
  train_cmd->add_option("--data", ta.data, "training dataset CSV")->required();
  train_cmd->add_option("--metric", ta.metric, "classifier metric: l2|linf");
  train_cmd->add_option("--threat", ta.threat, "threat norm for the margin (default: metric)");
  train_cmd->add_option("--ppc", ta.ppc, "prototypes per class");
  train_cmd->add_option("--cap", ta.cap, "margin cap R");
  train_cmd->add_option("--epochs", ta.epochs, "training epochs");
  train_cmd->add_option("--lr", ta.lr, "learning rate");
  train_cmd->add_option("--lr-decay", ta.lr_decay, "multiplicative decay per epoch");
  train_cmd->add_option("--batch-size", ta.batch, "batch size (default min(256, n))");
  train_cmd->add_option("--init", ta.init, "kmeans|samples");
  train_cmd->add_option("--optimizer", ta.optimizer, "adam|sgd");
  train_cmd->add_option("--seed", ta.seed, "random seed");
  train_cmd->add_option("--out", ta.out, "output model file (.json or .npc)");
  train_cmd->add_option("--trace", ta.trace, "loss trace CSV");
  train_cmd->add_option("--domain", ta.domain, "domain stored on the model");
  train_cmd->add_option("--augment-shift", ta.augment_shift, "max pixel shift augmentation");
  train_cmd->add_option("--image-side", ta.image_side, "image side length for shifts");
  train_cmd->add_option("--config", ta.config, "JSON config (explicit flags win)");

  CertifyArgs ca;
  CLI::App* cert_cmd = app.add_subcommand("certify", "certify a dataset");
  cert_cmd->add_option("--model", ca.model, "model file")->required();
  cert_cmd->add_option("--data", ca.data, "dataset file (CSV or .emb)")->required();
  cert_cmd->add_option("--threat", ca.threat, "threat norm: l1|l2|linf|embedded-l2");
  cert_cmd->add_option("--mode", ca.mode, "lower|exact");
  cert_cmd->add_option("--radius", ca.radii, "report CRA at this radius (repeatable)");
  cert_cmd->add_option("--domain", ca.domain, "override the model domain");
  double cap_val = 0;
  CLI::Option* cap_opt = cert_cmd->add_option("--cap", cap_val, "stop refining past this radius");
  cert_cmd->add_option("--jobs", ca.jobs, "worker threads");
  cert_cmd->add_option("--attack-budget", ca.attack_budget,
                       "classification budget for attack upper bounds (0 = off)");
  cert_cmd->add_option("--out", ca.out, "certificate CSV (default stdout)");
  cert_cmd->add_option("--config", ca.config, "JSON config (explicit flags win)");

  CurveArgs va;
  CLI::App* curve_cmd = app.add_subcommand("curve", "robust-accuracy-vs-radius curve");
  curve_cmd->add_option("--model", va.model, "model file")->required();
  curve_cmd->add_option("--data", va.data, "dataset file")->required();
  curve_cmd->add_option("--threat", va.threat, "threat norm");
  curve_cmd->add_option("--mode", va.mode, "lower|exact");
  curve_cmd->add_option("--rmin", va.rmin, "smallest radius");
  curve_cmd->add_option("--rmax", va.rmax, "largest radius");
  curve_cmd->add_option("--steps", va.steps, "number of radii");
  curve_cmd->add_option("--bound", va.bound, "plain | plain,dual (embedded models)");
  curve_cmd->add_option("--jobs", va.jobs, "worker threads");
  curve_cmd->add_option("--out", va.out, "curve CSV (default stdout)");
  curve_cmd->add_option("--config", va.config, "JSON config (explicit flags win)");

  IngestArgs ia;
  CLI::App* ingest_cmd = app.add_subcommand("ingest", "convert data to the canonical CSV");
  ingest_cmd->add_option("--images", ia.images, "IDX image file");
  ingest_cmd->add_option("--labels", ia.labels, "IDX label file");
  ingest_cmd->add_option("--csv", ia.csv, "CSV input");
  ingest_cmd->add_option("--out", ia.out, "output CSV");
  ingest_cmd->add_option("--config", ia.config, "JSON config (explicit flags win)");

  for (CLI::App* sub : {train_cmd, cert_cmd, curve_cmd, ingest_cmd})
    for (CLI::Option* opt : sub->get_options()) opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cert_cmd->get_option("--radius")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : kExitUsage;
  }

  if (train_cmd->parsed()) {
    if (!ta.config.empty()) apply_config(*train_cmd, ta.config);
    return run_train(ta);
  }
  if (cert_cmd->parsed()) {
    if (!ca.config.empty()) apply_config(*cert_cmd, ca.config);
    if (cap_opt->count() > 0) ca.cap = cap_val;
    return run_certify(ca);
  }
  if (curve_cmd->parsed()) {
    if (!va.config.empty()) apply_config(*curve_cmd, va.config);
    return run_curve(va);
  }
  if (ingest_cmd->parsed()) {
    if (!ia.config.empty()) apply_config(*ingest_cmd, ia.config);
    return run_ingest(ia);
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const UnsupportedCombination& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const SchemaVersionMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const InvariantViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const ClassTooSmall& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const DimensionMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const DomainViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const NotOnSphere& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const NegativeEntry& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
}
