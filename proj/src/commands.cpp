#include "cmbench/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>

#include "cmbench/error.hpp"
#include "cmbench/image_io.hpp"
#include "cmbench/random.hpp"
#include "json_util.hpp"

namespace cmbench {

namespace fs = std::filesystem;
using detail::json;

namespace {

bool in_family(Task t, EvalFamily f) {
  switch (f) {
    case EvalFamily::Homography: return t == Task::Homography;
    case EvalFamily::Pose: return t == Task::Pose;
    case EvalFamily::Geo: return t == Task::Geo || t == Task::GeoHard;
  }
  return false;
}

EvalFamily family_of(Task t) {
  switch (t) {
    case Task::Homography: return EvalFamily::Homography;
    case Task::Pose: return EvalFamily::Pose;
    default: return EvalFamily::Geo;
  }
}

std::vector<PairManifest> sorted_pairs(std::vector<PairManifest> pairs) {
  std::sort(pairs.begin(), pairs.end(),
            [](const PairManifest& a, const PairManifest& b) { return a.pair_id < b.pair_id; });
  return pairs;
}

void check_settings(const EvalSettings& s) {
  s.ransac.validate();
  s.preprocess.validate();
  if (s.resize_max < 0) throw Error(ErrorCode::InvalidArgument, "resize-max must be >= 0");
  if (s.max_matches == 0) throw Error(ErrorCode::InvalidArgument, "max-matches must be positive");
  if (s.workers < 1) throw Error(ErrorCode::InvalidArgument, "workers must be >= 1");
}

void check_thresholds(const std::vector<double>& taus) {
  if (taus.empty()) throw Error(ErrorCode::InvalidArgument, "no thresholds");
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (!(taus[i] > 0.0) || !std::isfinite(taus[i])) throw Error(ErrorCode::InvalidArgument, "thresholds must be positive");
    if (i > 0 && !(taus[i] > taus[i - 1])) throw Error(ErrorCode::InvalidArgument, "thresholds must be sorted ascending");
  }
}

void check_scene_tags(const std::vector<PairManifest>& pairs) {
  for (const auto& p : pairs) {
    if (p.scene_id.empty() || p.split_id.empty()) {
      throw Error(ErrorCode::MissingTag, "pose pair '" + p.pair_id + "' needs scene_id and split_id");
    }
  }
}

MatchIndex load_index(const fs::path& dir, std::size_t cap, std::ostream& log) {
  MatchLoadResult loaded = load_matches_dir(dir, cap);
  for (const auto& q : loaded.quarantine) {
    log << "quarantined " << q.source << ":" << q.line << " [" << to_string(q.code) << "] " << q.message << '\n';
  }
  if (!loaded.quarantine.empty()) log << loaded.quarantine.size() << " match record(s) quarantined\n";
  return MatchIndex(std::move(loaded.records));
}

std::vector<std::string> select_matchers(const MatchIndex& index, const std::vector<std::string>& requested) {
  if (requested.empty()) return index.matchers();
  std::set<std::string> ids(requested.begin(), requested.end());
  return {ids.begin(), ids.end()};
}

std::map<std::string, GeoAnnotation> load_annotations(const std::vector<PairManifest>& pairs) {
  std::map<std::string, GeoAnnotation> out;
  for (const auto& p : pairs) {
    if (const auto* g = std::get_if<GeoTruth>(&p.truth)) out.emplace(p.pair_id, load_geo_annotation(resolve(p, g->annotation)));
  }
  return out;
}

PairError evaluate_any(const PairManifest& p, const MatchFileRecord* r, const EvalSettings& s,
                       const std::map<std::string, GeoAnnotation>& annotations) {
  switch (p.task) {
    case Task::Homography: return evaluate_homography_pair(p, r, s);
    case Task::Pose: return evaluate_pose_pair(p, r, s);
    case Task::Geo:
    case Task::GeoHard: {
      auto it = annotations.find(p.pair_id);
      if (it == annotations.end()) return PairError::failed(p.pair_id);
      return evaluate_geo_pair(p, it->second, r, s);
    }
  }
  return PairError::failed(p.pair_id);
}

std::vector<TaggedPairError> tagged(const std::vector<PairManifest>& pairs, const std::vector<PairError>& errors) {
  std::vector<TaggedPairError> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) out.push_back({errors[i], pairs[i].scene_id, pairs[i].split_id});
  return out;
}

/// Pairs grouped by task in enum order, each group in pair_id order.
std::map<Task, std::vector<PairManifest>> group_by_task(const std::vector<PairManifest>& pairs) {
  std::map<Task, std::vector<PairManifest>> out;
  for (const auto& p : pairs) out[p.task].push_back(p);
  return out;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Embedder {
 public:
  explicit Embedder(const EmbeddingOptions& o) : options_(o), provider_(make_provider(o.provider, o.embeddings)) {
    builtin_ = provider_->id() == kBuiltinProviderId;
  }

  const EmbeddingProvider& provider() const { return *provider_; }

  EmbeddingVector embed(const PairManifest& pair, const std::string& image_id) const {
    if (!builtin_) return provider_->embed(image_id, nullptr);
    const fs::path path = resolve(pair, image_id);
    if (options_.cache_dir.empty()) {
      const GrayImage img = load_gray_image(path);
      return provider_->embed(image_id, &img);
    }
    const std::string bytes = read_file(path);
    char key[32];
    std::snprintf(key, sizeof key, "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
    const fs::path cached = options_.cache_dir / (provider_->id() + "-" + key + ".json");
    if (fs::exists(cached)) {
      try {
        const json j = json::parse(read_file(cached));
        auto values = j.at("values").get<std::vector<double>>();
        if (values.size() == provider_->dim()) return values;
      } catch (const std::exception&) {
        // unreadable cache entries are recomputed
      }
    }
    const GrayImage img = load_gray_image(path);
    EmbeddingVector v = provider_->embed(image_id, &img);
    std::error_code ec;
    fs::create_directories(options_.cache_dir, ec);
    const fs::path tmp = cached.string() + ".tmp" + std::to_string(fnv1a(pair.pair_id + image_id));
    {
      std::ofstream out(tmp, std::ios::binary);
      out << embedding_to_json({image_id, provider_->id(), v}).dump() << '\n';
    }
    fs::rename(tmp, cached, ec);
    if (ec) fs::remove(tmp, ec);
    return v;
  }

 private:
  EmbeddingOptions options_;
  std::unique_ptr<EmbeddingProvider> provider_;
  bool builtin_ = false;
};

struct DescriptorResult {
  std::optional<std::vector<double>> descriptor;
  std::string error;
};

std::vector<DescriptorResult> pair_descriptors(const std::vector<PairManifest>& pairs, const Embedder& embedder,
                                               int workers) {
  std::vector<DescriptorResult> out(pairs.size());
  parallel_for(pairs.size(), workers, [&](std::size_t i) {
    try {
      out[i].descriptor = fuse(embedder.embed(pairs[i], pairs[i].ir_image), embedder.embed(pairs[i], pairs[i].vis_image));
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  });
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

}  // namespace

std::vector<double> default_thresholds(EvalFamily f) {
  if (f == EvalFamily::Geo) return {3.0, 5.0, 10.0};
  return {5.0, 10.0, 20.0};
}

std::vector<ReportRow> run_eval(EvalFamily family, const RunOptions& options, std::ostream& log) {
  check_settings(options.settings);
  const std::vector<double> taus = options.thresholds.empty() ? default_thresholds(family) : options.thresholds;
  check_thresholds(taus);

  const ManifestSet set = load_manifest(options.manifest);
  std::vector<PairManifest> pairs;
  for (const auto& p : set.pairs) {
    if (in_family(p.task, family)) pairs.push_back(p);
  }
  pairs = sorted_pairs(std::move(pairs));
  if (pairs.empty()) throw NothingEvaluable("manifest has no pairs for this task");
  if (family == EvalFamily::Pose) check_scene_tags(pairs);
  const auto annotations = load_annotations(pairs);

  const MatchIndex index = load_index(options.matches_dir, options.settings.max_matches, log);
  const auto matchers = select_matchers(index, options.matchers);
  if (matchers.empty()) throw NothingEvaluable("no match records found in " + options.matches_dir.string());

  const std::string fingerprint = config_fingerprint(options.settings);
  std::vector<ReportRow> rows;
  for (const auto& [task, group] : group_by_task(pairs)) {
    for (const auto& matcher : matchers) {
      std::vector<PairError> errors(group.size());
      parallel_for(group.size(), options.settings.workers, [&](std::size_t i) {
        const MatchFileRecord* rec = index.find(group[i].pair_id, matcher, options.settings.branch);
        errors[i] = evaluate_any(group[i], rec, options.settings, annotations);
      });

      ReportRow row;
      row.matcher_id = matcher;
      row.category = index.category(matcher);
      row.task = std::string(task_name(task));
      row.n_pairs = group.size();
      row.success_rate = estimation_success_rate(errors);
      row.fingerprint = fingerprint;
      if (family == EvalFamily::Geo) {
        std::optional<double> med;
        if (std::any_of(errors.begin(), errors.end(), [](const PairError& e) { return e.ok(); })) med = median_error(errors);
        row.metrics.push_back({"mederr_m", med});
        for (double t : taus) row.metrics.push_back({threshold_column("sr", t, "m"), success_rate(errors, t)});
      } else if (family == EvalFamily::Pose) {
        const auto balanced = scene_balanced_auc(tagged(group, errors), taus);
        for (std::size_t k = 0; k < taus.size(); ++k) row.metrics.push_back({threshold_column("auc", taus[k]), balanced[k]});
      } else {
        for (double t : taus) row.metrics.push_back({threshold_column("auc", t), auc(errors, t)});
      }
      rows.push_back(std::move(row));
    }
  }
  sort_rows(rows);
  return rows;
}

// ---------------------------------------------------------------------------

GateLabelResult run_gate_label(const GateLabelOptions& options, std::ostream& log) {
  check_settings(options.settings);
  const auto pairs = sorted_pairs(load_manifest(options.manifest).pairs);
  if (pairs.empty()) throw NothingEvaluable("manifest is empty");
  const MatchIndex index = load_index(options.matches_dir, options.settings.max_matches, log);
  const auto matchers = select_matchers(index, options.matchers);
  if (matchers.empty()) throw NothingEvaluable("no match records found in " + options.matches_dir.string());

  const Embedder embedder(options.embedding);
  const auto descriptors = pair_descriptors(pairs, embedder, options.settings.workers);

  const std::size_t m = matchers.size();
  std::vector<std::optional<GateSample>> samples(pairs.size() * m);
  std::vector<std::optional<SkippedPair>> skipped(pairs.size() * m);
  parallel_for(pairs.size() * m, options.settings.workers, [&](std::size_t k) {
    const PairManifest& pair = pairs[k / m];
    const std::string& matcher = matchers[k % m];
    SkippedPair skip{pair.pair_id, matcher, "", {}};
    std::array<std::size_t, kBranchCount> counts{};
    std::array<Status, kBranchCount> statuses{};
    std::string missing;
    for (BranchId b : kAllBranches) {
      const auto c = static_cast<std::size_t>(branch_code(b));
      statuses[c] = Status::Failed;
      const MatchFileRecord* rec = index.find(pair.pair_id, matcher, b);
      if (rec == nullptr) {
        missing += (missing.empty() ? "" : " ") + std::string(branch_name(b));
        continue;
      }
      if (rec->status != "ok" || rec->size_a != pair.ir_size || rec->size_b != pair.vis_size) continue;
      const HomographyEstimate est = verify_matches(pair, *rec, options.settings);
      statuses[c] = est.status;
      counts[c] = est.ok() ? est.inlier_count : 0;
    }
    skip.inlier_counts = counts;
    if (!missing.empty()) {
      skip.reason = "missing branch records: " + missing;
      skipped[k] = skip;
      return;
    }
    if (!descriptors[k / m].descriptor) {
      skip.reason = "embedding failed: " + descriptors[k / m].error;
      skipped[k] = skip;
      return;
    }
    try {
      const OracleLabel label = label_from_counts(counts, statuses);
      GateSample s;
      s.pair_id = pair.pair_id;
      s.matcher_id = matcher;
      s.provider = embedder.provider().id();
      s.descriptor = *descriptors[k / m].descriptor;
      s.label = label.label;
      s.inlier_counts = label.inlier_counts;
      samples[k] = std::move(s);
    } catch (const Error& e) {
      skip.reason = std::string(to_string(e.code()));
      skipped[k] = skip;
    }
  });

  GateLabelResult result;
  for (auto& s : samples) {
    if (s) result.samples.push_back(std::move(*s));
  }
  for (auto& s : skipped) {
    if (s) result.skipped.push_back(std::move(*s));
  }

  std::vector<json> sample_json;
  for (const auto& s : result.samples) sample_json.push_back(sample_to_json(s));
  std::vector<json> skip_json;
  for (const auto& s : result.skipped) {
    skip_json.push_back({{"pair_id", s.pair_id}, {"matcher_id", s.matcher_id}, {"reason", s.reason},
                         {"inlier_counts", s.inlier_counts}});
  }
  if (options.out.has_parent_path()) fs::create_directories(options.out.parent_path());
  write_jsonl(options.out, sample_json);
  const fs::path skip_path = options.skip_file.empty() ? fs::path(options.out.string() + ".skipped.jsonl") : options.skip_file;
  write_jsonl(skip_path, skip_json);

  std::array<std::size_t, kBranchCount> hist{};
  for (const auto& s : result.samples) ++hist[static_cast<std::size_t>(branch_code(s.label))];
  log << result.samples.size() << " samples, " << result.skipped.size() << " skipped (" << skip_path.string() << ")\n";
  for (BranchId b : kAllBranches) log << "  " << branch_name(b) << ": " << hist[static_cast<std::size_t>(branch_code(b))] << '\n';
  for (const auto& s : result.skipped) log << "skipped " << s.pair_id << " / " << s.matcher_id << ": " << s.reason << '\n';
  return result;
}

// ---------------------------------------------------------------------------

std::string gate_model_filename(const std::string& matcher_id, bool shared) {
  if (shared) return "gate-shared.json";
  std::string safe = matcher_id;
  for (char& c : safe) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                    c == '_' || c == '-';
    if (!ok) c = '_';
  }
  return "gate-" + safe + ".json";
}

std::map<std::string, TrainResult> run_gate_train(const GateTrainOptions& options, std::ostream& log) {
  const auto samples = load_gate_samples(options.samples);
  const std::set<std::string> wanted(options.matchers.begin(), options.matchers.end());
  std::map<std::string, std::vector<GateSample>> groups;
  for (const auto& s : samples) {
    if (!wanted.empty() && !wanted.contains(s.matcher_id)) continue;
    groups[options.shared ? std::string() : s.matcher_id].push_back(s);
  }
  if (groups.empty()) throw NothingEvaluable("no training samples");

  fs::create_directories(options.out_dir);
  std::map<std::string, TrainResult> out;
  for (auto& [matcher, group] : groups) {
    TrainResult r = train_gate(group, options.hyper);
    if (options.shared) r.model.matcher_id.clear();
    const fs::path path = options.out_dir / gate_model_filename(matcher, options.shared);
    save_model(path, r.model);
    for (const auto& w : r.warnings) log << "warning [" << (options.shared ? "shared" : matcher) << "]: " << w << '\n';
    log << (options.shared ? "shared" : matcher) << ": " << group.size() << " samples, loss " << r.initial_loss
        << " -> " << r.final_loss << ", wrote " << path.string() << '\n';
    out.emplace(matcher, std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::optional<double> gain_percent(double baseline, double adaptive) {
  if (baseline == 0.0) return adaptive == 0.0 ? std::optional<double>(0.0) : std::nullopt;
  return (adaptive - baseline) / baseline * 100.0;
}

std::vector<ReportRow> run_gate_eval(const GateEvalOptions& options, std::ostream& log) {
  check_settings(options.settings);
  if (!(options.threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be positive");
  const auto pairs = sorted_pairs(load_manifest(options.manifest).pairs);
  if (pairs.empty()) throw NothingEvaluable("manifest is empty");
  std::vector<PairManifest> pose_pairs;
  for (const auto& p : pairs) {
    if (p.task == Task::Pose) pose_pairs.push_back(p);
  }
  check_scene_tags(pose_pairs);
  const auto annotations = load_annotations(pairs);
  const MatchIndex index = load_index(options.matches_dir, options.settings.max_matches, log);
  const auto matchers = select_matchers(index, options.matchers);
  if (matchers.empty()) throw NothingEvaluable("no match records found in " + options.matches_dir.string());

  const Embedder embedder(options.embedding);
  std::map<std::string, GateModel> models;
  for (const auto& matcher : matchers) {
    fs::path path = options.models_dir / gate_model_filename(matcher, false);
    if (!fs::exists(path)) path = options.models_dir / gate_model_filename(matcher, true);
    GateModel model = load_model(path);
    if (model.provider != embedder.provider().id()) {
      throw Error(ErrorCode::InvalidArgument, path.string() + " was trained on provider '" + model.provider +
                                                  "', evaluating with '" + embedder.provider().id() + "'");
    }
    if (model.dim != 4 * embedder.provider().dim()) {
      throw Error(ErrorCode::DimensionMismatch, path.string() + " expects descriptors of length " +
                                                    std::to_string(model.dim));
    }
    models.emplace(matcher, std::move(model));
  }
  const auto descriptors = pair_descriptors(pairs, embedder, options.settings.workers);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!descriptors[i].descriptor) {
      log << "embedding failed for " << pairs[i].pair_id << ", using branch none: " << descriptors[i].error << '\n';
    }
  }

  std::string fingerprint = config_fingerprint(options.settings);
  {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", options.threshold);
    fingerprint += "|gate:provider=" + embedder.provider().id() + ";metric@" + buf;
  }

  std::vector<ReportRow> rows;
  for (const auto& matcher : matchers) {
    const GateModel& model = models.at(matcher);
    std::vector<BranchId> predicted(pairs.size(), BranchId::None);
    std::vector<std::array<PairError, kBranchCount>> branch_errors(pairs.size());
    parallel_for(pairs.size(), options.settings.workers, [&](std::size_t i) {
      if (descriptors[i].descriptor) predicted[i] = predict_branch(model, *descriptors[i].descriptor).branch;
      for (BranchId b : kAllBranches) {
        branch_errors[i][static_cast<std::size_t>(branch_code(b))] =
            evaluate_any(pairs[i], index.find(pairs[i].pair_id, matcher, b), options.settings, annotations);
      }
    });

    std::map<Task, std::vector<std::size_t>> by_task;
    for (std::size_t i = 0; i < pairs.size(); ++i) by_task[pairs[i].task].push_back(i);
    for (const auto& [task, members] : by_task) {
      std::vector<PairManifest> group;
      std::vector<PairError> baseline, adaptive, oracle;
      std::array<std::size_t, kBranchCount> hist{};
      for (std::size_t i : members) {
        group.push_back(pairs[i]);
        const auto& errs = branch_errors[i];
        baseline.push_back(errs[0]);
        adaptive.push_back(errs[static_cast<std::size_t>(branch_code(predicted[i]))]);
        ++hist[static_cast<std::size_t>(branch_code(predicted[i]))];
        PairError best = PairError::failed(pairs[i].pair_id);
        for (const auto& e : errs) {
          if (e.ok() && (!best.ok() || e.value < best.value)) best = e;
        }
        oracle.push_back(best);
      }
      auto metric = [&](const std::vector<PairError>& errors) {
        switch (family_of(task)) {
          case EvalFamily::Homography: return auc(errors, options.threshold);
          case EvalFamily::Pose: return scene_balanced_auc(tagged(group, errors), {options.threshold}).front();
          case EvalFamily::Geo: return success_rate(errors, options.threshold);
        }
        return 0.0;
      };
      const double b = metric(baseline), a = metric(adaptive), o = metric(oracle);
      ReportRow row;
      row.matcher_id = matcher;
      row.category = index.category(matcher);
      row.task = std::string(task_name(task));
      row.n_pairs = members.size();
      row.success_rate = estimation_success_rate(adaptive);
      row.metrics = {{"baseline", b}, {"adaptive", a}, {"oracle", o}, {"gain_pct", gain_percent(b, a)}};
      row.fingerprint = fingerprint;
      rows.push_back(std::move(row));
      log << matcher << " / " << task_name(task) << " predicted branches:";
      for (BranchId br : kAllBranches) log << ' ' << branch_name(br) << '=' << hist[static_cast<std::size_t>(branch_code(br))];
      log << '\n';
    }
  }
  sort_rows(rows);
  return rows;
}

// ---------------------------------------------------------------------------

GrayImage synthetic_texture(std::uint64_t seed, int width, int height) {
  std::mt19937_64 rng(seed);
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves;
  for (int k = 0; k < 6; ++k) {
    waves.push_back({uniform(rng, -0.15, 0.15), uniform(rng, -0.15, 0.15), uniform(rng, 0.0, 2.0 * std::numbers::pi),
                     uniform(rng, 10.0, 30.0)});
  }
  struct Blob {
    double x, y, r, level;
  };
  std::vector<Blob> blobs;
  for (int k = 0; k < 40; ++k) {
    blobs.push_back({uniform(rng, 0, width), uniform(rng, 0, height), uniform(rng, 3.0, 0.08 * std::min(width, height) + 4.0),
                     uniform(rng, -60.0, 60.0)});
  }
  GrayImage img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double v = 128.0;
      for (const auto& w : waves) v += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
      for (const auto& b : blobs) {
        const double dx = x - b.x, dy = y - b.y;
        if (dx * dx + dy * dy <= b.r * b.r) v += b.level;
      }
      img.at(x, y) = to_byte(v);
    }
  }
  return img;
}

GrayImage warp_image(const GrayImage& src, const Homography& h, int width, int height) {
  const Homography inv = invert_homography(h);
  GrayImage out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto p = try_apply_homography(inv, {x + 0.5, y + 0.5});
      if (!p) continue;
      const double sx = p->x - 0.5, sy = p->y - 0.5;
      if (!(sx >= 0.0 && sy >= 0.0 && sx <= src.width - 1 && sy <= src.height - 1)) continue;
      const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, src.width - 1), y1 = std::min(y0 + 1, src.height - 1);
      const double ax = sx - x0, ay = sy - y0;
      const double top = src.at(x0, y0) + ax * (src.at(x1, y0) - src.at(x0, y0));
      const double bottom = src.at(x0, y1) + ax * (src.at(x1, y1) - src.at(x0, y1));
      out.at(x, y) = to_byte(top + ay * (bottom - top));
    }
  }
  return out;
}

std::vector<PairManifest> run_synth_pairs(const SynthOptions& options, std::ostream& log) {
  if (options.count <= 0) throw Error(ErrorCode::InvalidArgument, "count must be positive");
  if (options.num_matches <= 0 || static_cast<std::size_t>(options.num_matches) > kDefaultMatchCap) {
    throw Error(ErrorCode::InvalidArgument, "num-matches must be in [1, 2048]");
  }
  if (options.noise_px < 0.0 || options.outlier_ratio < 0.0 || options.outlier_ratio > 1.0) {
    throw Error(ErrorCode::InvalidArgument, "noise must be >= 0 and outlier ratio in [0, 1]");
  }
  const fs::path base = options.out.parent_path();
  if (!base.empty()) fs::create_directories(base);
  if (options.images) fs::create_directories(base / "images");

  const FrameSize size{options.width, options.height};
  std::vector<PairManifest> pairs;
  std::vector<MatchFileRecord> records;
  for (int i = 0; i < options.count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "synth-%04d", i);
    const std::uint64_t seed = pair_seed(options.seed, id);
    const SyntheticPair sp = sample_homography(seed, options.width, options.height);

    PairManifest m;
    m.pair_id = id;
    m.dataset_id = options.dataset_id;
    m.task = Task::Homography;
    m.ir_image = "images/" + m.pair_id + "_ir.png";
    m.vis_image = "images/" + m.pair_id + "_vis.png";
    m.ir_size = size;
    m.vis_size = size;
    m.truth = HomographyTruth{seed, options.width, options.height, sp.ground_truth};
    m.warped_side = "vis";
    m.base_dir = base;
    if (options.images) {
      const GrayImage tex = synthetic_texture(seed, options.width, options.height);
      save_png(base / m.ir_image, tex);
      save_png(base / m.vis_image, warp_image(tex, sp.ground_truth, options.width, options.height));
    }

    if (!options.matches_out.empty()) {
      std::mt19937_64 rng(seed ^ 0x6d61746368657321ull);
      MatchFileRecord r;
      r.pair_id = m.pair_id;
      r.matcher_id = options.matcher_id;
      r.category = options.category;
      r.branch = BranchId::None;
      r.size_a = size;
      r.size_b = size;
      const double s = eval_scale(size, 640);
      r.matched_size_a = {static_cast<int>(std::lround(size.width * s)), static_cast<int>(std::lround(size.height * s))};
      r.matched_size_b = r.matched_size_a;
      r.resize_policy = "max-dim-640";
      const auto n = static_cast<std::size_t>(options.num_matches);
      for (int attempt = 0; attempt < 50 * options.num_matches && r.matches.size() < n; ++attempt) {
        const Point2 a{uniform(rng, 0.0, options.width), uniform(rng, 0.0, options.height)};
        Point2 b;
        if (unit_uniform(rng) < options.outlier_ratio) {
          b = {uniform(rng, 0.0, options.width), uniform(rng, 0.0, options.height)};
        } else {
          const auto w = try_apply_homography(sp.ground_truth, a);
          if (!w) continue;
          b = {w->x + options.noise_px * standard_normal(rng), w->y + options.noise_px * standard_normal(rng)};
        }
        if (b.x < 0.0 || b.y < 0.0 || b.x > options.width || b.y > options.height) continue;
        r.matches.push_back({a, b, std::nullopt});
      }
      records.push_back(std::move(r));
    }
    pairs.push_back(std::move(m));
  }
  write_manifest(options.out, pairs);
  if (!options.matches_out.empty()) {
    if (options.matches_out.has_parent_path()) fs::create_directories(options.matches_out.parent_path());
    write_matches(options.matches_out, records);
  }
  log << "wrote " << pairs.size() << " pairs to " << options.out.string() << '\n';
  return pairs;
}

// ---------------------------------------------------------------------------

json preprocess_config_to_json(const BranchParams& p) {
  return {{"schema", kPreprocessConfigSchema},
          {"unsharp", {{"sigma", p.unsharp_sigma}, {"amount", p.unsharp_amount}}},
          {"scharr_lcn", {{"window", p.lcn_window}, {"epsilon", p.lcn_epsilon}, {"order", "normalize-rescale"}}},
          {"morph_gradient", {{"radius", p.morph_radius}}}};
}

BranchParams preprocess_config_from_json(const json& j) {
  const detail::Where w{"<preprocess config>", 1};
  detail::check_schema(j, kPreprocessConfigSchema, w);
  BranchParams p;
  const json& u = detail::require(j, "unsharp", w);
  const json& l = detail::require(j, "scharr_lcn", w);
  const json& m = detail::require(j, "morph_gradient", w);
  p.unsharp_sigma = detail::get_number(u, "sigma", w);
  p.unsharp_amount = detail::get_number(u, "amount", w);
  p.lcn_window = static_cast<int>(detail::get_integer(l, "window", w));
  p.lcn_epsilon = detail::get_number(l, "epsilon", w);
  p.morph_radius = static_cast<int>(detail::get_integer(m, "radius", w));
  p.validate();
  return p;
}

void run_preprocess(const PreprocessOptions& options, std::ostream& log) {
  BranchParams params = options.params;
  if (!options.config.empty()) {
    try {
      params = preprocess_config_from_json(json::parse(read_file(options.config)));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, options.config.string() + ": " + e.what());
    }
  }
  params.validate();
  if (!options.write_config.empty()) write_text(options.write_config, preprocess_config_to_json(params).dump(2) + "\n");
  if (options.inputs.empty()) return;
  fs::create_directories(options.out_dir);
  parallel_for(options.inputs.size(), options.workers, [&](std::size_t i) {
    const GrayImage img = load_gray_image(options.inputs[i]);
    const fs::path out =
        options.out_dir / (options.inputs[i].stem().string() + "_" + std::string(branch_name(options.branch)) + ".png");
    save_png(out, apply_branch(options.branch, img, params));
  });
  log << "wrote " << options.inputs.size() << " image(s) to " << options.out_dir.string() << '\n';
}

// ---------------------------------------------------------------------------

std::vector<ReportRow> run_report(const ReportOptions& options) {
  if (options.inputs.empty()) throw Error(ErrorCode::InvalidArgument, "no report files given");
  std::vector<ReportRow> rows;
  for (const auto& p : options.inputs) {
    auto part = read_report(p);
    std::move(part.begin(), part.end(), std::back_inserter(rows));
  }
  check_compatible(rows, options.force);
  sort_rows(rows);
  return rows;
}

void emit_report(const std::vector<ReportRow>& rows, const fs::path& out, ReportFormat format, std::ostream& stdout_sink) {
  std::ostringstream buf;
  write_report(buf, rows, format);
  if (out.empty()) {
    stdout_sink << buf.str();
  } else {
    write_text(out, buf.str());
  }
}

int guarded(std::ostream& log, const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const NothingEvaluable& e) {
    log << "nothing to evaluate: " << e.what() << '\n';
    return kExitNothingEvaluable;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace cmbench
