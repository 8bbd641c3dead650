#include "cmbench/evaluate.hpp"

#include <algorithm>
#include <set>
#include <thread>

#include "cmbench/error.hpp"

namespace cmbench {

namespace {

bool usable(const MatchFileRecord* r, const PairManifest& pair) {
  return r != nullptr && r->status == "ok" && r->size_a == pair.ir_size && r->size_b == pair.vis_size;
}

Homography scale_h(double s) { return Homography::scaling(s, s); }

}  // namespace

double eval_scale(const FrameSize& size, int resize_max) {
  if (resize_max <= 0) return 1.0;
  return static_cast<double>(resize_max) / static_cast<double>(std::max(size.width, size.height));
}

std::uint64_t pair_seed(std::uint64_t base, const std::string& pair_id) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : pair_id) {
    h ^= c;
    h *= 1099511628211ull;
  }
  // splitmix64 finalizer
  std::uint64_t z = base ^ h;
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

MatchSet scale_matches(const MatchSet& matches, double scale_a, double scale_b) {
  MatchSet out;
  out.reserve(matches.size());
  for (const Match& m : matches) {
    out.push_back({{m.a.x * scale_a, m.a.y * scale_a}, {m.b.x * scale_b, m.b.y * scale_b}, m.confidence});
  }
  return out;
}

HomographyEstimate verify_matches(const PairManifest& pair, const MatchFileRecord& record, const EvalSettings& s) {
  RansacConfig cfg = s.ransac;
  cfg.seed = pair_seed(s.ransac.seed, pair.pair_id);
  const double sa = eval_scale(pair.ir_size, s.resize_max);
  const double sb = eval_scale(pair.vis_size, s.resize_max);
  return ransac_homography(scale_matches(record.matches, sa, sb), cfg);
}

PairError evaluate_homography_pair(const PairManifest& pair, const MatchFileRecord* record, const EvalSettings& s) {
  const auto* truth = std::get_if<HomographyTruth>(&pair.truth);
  if (truth == nullptr || !usable(record, pair)) return PairError::failed(pair.pair_id);
  const HomographyEstimate est = verify_matches(pair, *record, s);
  if (!est.ok()) return PairError::failed(pair.pair_id);
  const double sa = eval_scale(pair.ir_size, s.resize_max);
  const double sb = eval_scale(pair.vis_size, s.resize_max);
  try {
    const Homography gt_eval = scale_h(sb) * truth->h * scale_h(1.0 / sa);
    const double err = corner_error(*est.model, gt_eval, truth->width * sa, truth->height * sa);
    return PairError::success(pair.pair_id, err);
  } catch (const Error&) {
    return PairError::failed(pair.pair_id);
  }
}

PairError evaluate_pose_pair(const PairManifest& pair, const MatchFileRecord* record, const EvalSettings& s) {
  const auto* truth = std::get_if<PoseTruth>(&pair.truth);
  if (truth == nullptr || !usable(record, pair)) return PairError::failed(pair.pair_id);
  const double sa = eval_scale(pair.ir_size, s.resize_max);
  const double sb = eval_scale(pair.vis_size, s.resize_max);
  auto scaled = [](const CameraIntrinsics& k, double f) {
    return CameraIntrinsics{k.fx * f, k.fy * f, k.cx * f, k.cy * f};
  };
  RansacConfig cfg = s.ransac;
  cfg.seed = pair_seed(s.ransac.seed, pair.pair_id);
  const PoseEstimate est = estimate_relative_pose(scale_matches(record->matches, sa, sb), scaled(truth->k_ir, sa),
                                                  scaled(truth->k_vis, sb), cfg);
  if (!est.ok()) return PairError::failed(pair.pair_id);
  return PairError::success(pair.pair_id, pose_angular_error(*est.model, truth->pose));
}

PairError evaluate_geo_pair(const PairManifest& pair, const GeoAnnotation& annotation, const MatchFileRecord* record,
                            const EvalSettings& s) {
  if (!usable(record, pair)) return PairError::failed(pair.pair_id);
  const HomographyEstimate est = verify_matches(pair, *record, s);
  if (!est.ok()) return PairError::failed(pair.pair_id);
  const double sa = eval_scale(pair.ir_size, s.resize_max);
  const double sb = eval_scale(pair.vis_size, s.resize_max);
  try {
    const Homography original = scale_h(1.0 / sb) * *est.model * scale_h(sa);
    return PairError::success(pair.pair_id, geo_error(original, annotation));
  } catch (const Error&) {
    return PairError::failed(pair.pair_id);
  }
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t w = std::clamp<std::size_t>(workers < 1 ? 1 : static_cast<std::size_t>(workers), 1, std::max<std::size_t>(n, 1));
  if (w == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(w);
  pool.reserve(w);
  for (std::size_t t = 0; t < w; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += w) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

MatchIndex::MatchIndex(std::vector<MatchFileRecord> records) : records_(std::move(records)) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    index_.emplace(std::make_tuple(r.pair_id, r.matcher_id, branch_code(r.branch)), i);
  }
}

const MatchFileRecord* MatchIndex::find(const std::string& pair_id, const std::string& matcher_id,
                                        BranchId branch) const {
  auto it = index_.find(std::make_tuple(pair_id, matcher_id, branch_code(branch)));
  return it == index_.end() ? nullptr : &records_[it->second];
}

std::vector<std::string> MatchIndex::matchers() const {
  std::set<std::string> ids;
  for (const auto& r : records_) ids.insert(r.matcher_id);
  return {ids.begin(), ids.end()};
}

std::string MatchIndex::category(const std::string& matcher_id) const {
  for (const auto& r : records_) {
    if (r.matcher_id == matcher_id && !r.category.empty()) return r.category;
  }
  return {};
}

}  // namespace cmbench
