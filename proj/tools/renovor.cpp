// renovor command-line tool: each workflow stage as a subcommand, plus the
// chained `pipeline`. Exit codes: 0 success, 1 usage error, 2 data error.

#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "renovor/renovor.hpp"

namespace fs = std::filesystem;
using namespace renovor;

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------- config

void check_keys(const Json &j, const std::set<std::string> &allowed, const std::string &where)
{
  if (!j.is_object()) throw UsageError(where + " must be a JSON object");
  for (const auto &[k, v] : j.items())
    if (!allowed.count(k)) throw UsageError("unknown config key '" + where + "." + k + "'");
}

template <typename T>
void take(const Json &j, const char *key, T &dst)
{
  if (j.contains(key)) dst = j.at(key).get<T>();
}

void apply_phantom_json(const Json &j, PhantomSpec &s)
{
  check_keys(j,
             {"dims", "spacing", "origin", "kidney_center_mm", "kidney_semi_axes_mm", "tree", "tumor", "background_hu",
              "kidney_hu", "vessel_hu", "tumor_hu", "noise_sigma", "blur_sigma_mm"},
             "phantom");
  take(j, "dims", s.geometry.dims);
  take(j, "spacing", s.geometry.spacing);
  take(j, "origin", s.geometry.origin);
  take(j, "kidney_center_mm", s.kidney_center_mm);
  take(j, "kidney_semi_axes_mm", s.kidney_semi_axes_mm);
  take(j, "background_hu", s.background_hu);
  take(j, "kidney_hu", s.kidney_hu);
  take(j, "vessel_hu", s.vessel_hu);
  take(j, "tumor_hu", s.tumor_hu);
  take(j, "noise_sigma", s.noise_sigma);
  take(j, "blur_sigma_mm", s.blur_sigma_mm);
  if (j.contains("tree")) {
    const auto &t = j.at("tree");
    check_keys(t,
               {"depth", "start_mm", "direction", "root_radius_mm", "radius_decay", "min_angle_deg", "max_angle_deg",
                "min_length_mm", "max_length_mm", "length_decay"},
               "phantom.tree");
    take(t, "depth", s.tree.depth);
    take(t, "start_mm", s.tree.start_mm);
    take(t, "direction", s.tree.direction);
    take(t, "root_radius_mm", s.tree.root_radius_mm);
    take(t, "radius_decay", s.tree.radius_decay);
    take(t, "min_angle_deg", s.tree.min_angle_deg);
    take(t, "max_angle_deg", s.tree.max_angle_deg);
    take(t, "min_length_mm", s.tree.min_length_mm);
    take(t, "max_length_mm", s.tree.max_length_mm);
    take(t, "length_decay", s.tree.length_decay);
  }
  if (j.contains("tumor")) {
    const auto &t = j.at("tumor");
    if (t.is_null()) {
      s.tumor.reset();
    } else {
      check_keys(t, {"center_mm", "radius_mm"}, "phantom.tumor");
      Sphere sp;
      take(t, "center_mm", sp.center_mm);
      take(t, "radius_mm", sp.radius_mm);
      s.tumor = sp;
    }
  }
}

Json phantom_json(const PhantomSpec &s)
{
  Json tumor = nullptr;
  if (s.tumor) tumor = Json{{"center_mm", s.tumor->center_mm}, {"radius_mm", s.tumor->radius_mm}};
  const auto &t = s.tree;
  return Json{{"dims", s.geometry.dims},
              {"spacing", s.geometry.spacing},
              {"origin", s.geometry.origin},
              {"kidney_center_mm", s.kidney_center_mm},
              {"kidney_semi_axes_mm", s.kidney_semi_axes_mm},
              {"tree",
               {{"depth", t.depth},
                {"start_mm", t.start_mm},
                {"direction", t.direction},
                {"root_radius_mm", t.root_radius_mm},
                {"radius_decay", t.radius_decay},
                {"min_angle_deg", t.min_angle_deg},
                {"max_angle_deg", t.max_angle_deg},
                {"min_length_mm", t.min_length_mm},
                {"max_length_mm", t.max_length_mm},
                {"length_decay", t.length_decay}}},
              {"tumor", tumor},
              {"background_hu", s.background_hu},
              {"kidney_hu", s.kidney_hu},
              {"vessel_hu", s.vessel_hu},
              {"tumor_hu", s.tumor_hu},
              {"noise_sigma", s.noise_sigma},
              {"blur_sigma_mm", s.blur_sigma_mm}};
}

struct Settings {
  PipelineConfig cfg;
  PhantomSpec phantom;
  // stage inputs that are not part of PipelineConfig
  fs::path vessels, tree, gt, seg, gt_centerline, seg_centerline;
  bool paper_protocol = false;
};

void apply_config_json(const Json &j, Settings &st)
{
  check_keys(j,
             {"ct", "kidney", "tumor", "vessels", "tree_json", "gt", "seg", "gt_centerline", "seg_centerline", "out_dir",
              "seed", "vesselness", "tensorcut", "tree", "voronoi", "phantom", "paper_protocol"},
             "config");
  auto &c = st.cfg;
  const auto path = [&](const char *key, fs::path &dst) {
    if (j.contains(key)) dst = j.at(key).get<std::string>();
  };
  path("ct", c.ct);
  path("kidney", c.kidney);
  if (j.contains("tumor")) {
    if (j.at("tumor").is_null()) c.tumor.reset();
    else c.tumor = fs::path(j.at("tumor").get<std::string>());
  }
  path("vessels", st.vessels);
  path("tree_json", st.tree);
  path("gt", st.gt);
  path("seg", st.seg);
  path("gt_centerline", st.gt_centerline);
  path("seg_centerline", st.seg_centerline);
  path("out_dir", c.out_dir);
  take(j, "seed", c.seed);
  take(j, "paper_protocol", st.paper_protocol);
  if (j.contains("vesselness")) {
    const auto &v = j.at("vesselness");
    check_keys(v, {"scales_mm", "gamma12", "gamma23"}, "vesselness");
    take(v, "scales_mm", c.vesselness.scales_mm);
    take(v, "gamma12", c.vesselness.gamma12);
    take(v, "gamma23", c.vesselness.gamma23);
  }
  if (j.contains("tensorcut")) {
    const auto &t = j.at("tensorcut");
    check_keys(t,
               {"lambda_I", "lambda_T", "omega", "sigma_I", "sigma_T", "neighborhood", "fg_percentile",
                "bg_percentile", "seed_exclusion_mm", "fg_components", "bg_components", "voi_margin_vox"},
               "tensorcut");
    take(t, "lambda_I", c.energy.lambda_I);
    take(t, "lambda_T", c.energy.lambda_T);
    take(t, "omega", c.energy.omega);
    take(t, "sigma_I", c.energy.sigma_boundary_I);
    take(t, "sigma_T", c.energy.sigma_boundary_T);
    take(t, "neighborhood", c.energy.neighborhood);
    take(t, "fg_percentile", c.seeds.foreground_vesselness_percentile);
    take(t, "bg_percentile", c.seeds.background_intensity_percentile);
    take(t, "seed_exclusion_mm", c.seeds.exclusion_mm);
    take(t, "fg_components", c.cut.foreground_components);
    take(t, "bg_components", c.cut.background_components);
    take(t, "voi_margin_vox", c.voi_margin_vox);
  }
  if (j.contains("tree")) {
    const auto &t = j.at("tree");
    check_keys(t, {"prune_spur_mm", "root_hint_mm"}, "tree");
    take(t, "prune_spur_mm", c.tree.prune_spur_mm);
    if (t.contains("root_hint_mm")) {
      if (t.at("root_hint_mm").is_null()) c.root_hint.reset();
      else c.root_hint = t.at("root_hint_mm").get<Vec3>();
    }
  }
  if (j.contains("voronoi")) {
    const auto &v = j.at("voronoi");
    check_keys(v, {"level_offset", "margin_mm"}, "voronoi");
    take(v, "level_offset", c.level_offset);
    take(v, "margin_mm", c.margin_mm);
  }
  if (j.contains("phantom")) apply_phantom_json(j.at("phantom"), st.phantom);
}

Json parameters_json(const PipelineConfig &c)
{
  Json hint = nullptr;
  if (c.root_hint) hint = *c.root_hint;
  return Json{{"seed", c.seed},
              {"vesselness",
               {{"scales_mm", c.vesselness.scales_mm},
                {"gamma12", c.vesselness.gamma12},
                {"gamma23", c.vesselness.gamma23}}},
              {"tensorcut",
               {{"lambda_I", c.energy.lambda_I},
                {"lambda_T", c.energy.lambda_T},
                {"omega", c.energy.omega},
                {"sigma_I", c.energy.sigma_boundary_I},
                {"sigma_T", c.energy.sigma_boundary_T},
                {"neighborhood", c.energy.neighborhood},
                {"fg_percentile", c.seeds.foreground_vesselness_percentile},
                {"bg_percentile", c.seeds.background_intensity_percentile},
                {"seed_exclusion_mm", c.seeds.exclusion_mm},
                {"fg_components", c.cut.foreground_components},
                {"bg_components", c.cut.background_components},
                {"voi_margin_vox", c.voi_margin_vox}}},
              {"tree", {{"prune_spur_mm", c.tree.prune_spur_mm}, {"root_hint_mm", hint}}},
              {"voronoi", {{"level_offset", c.level_offset}, {"margin_mm", c.margin_mm}}}};
}

// ---------------------------------------------------------------- flags

struct Flags {
  std::optional<std::string> config, out_dir, ct, kidney, tumor, vessels, tree, gt, seg, gt_centerline,
      seg_centerline;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<double>> scales, root_hint, tumor_sphere;
  std::optional<double> gamma12, gamma23, omega, lambda_i, lambda_t, sigma_i, sigma_t, fg_pct, bg_pct, excl_mm,
      margin_mm, prune_mm, noise_sigma, vessel_hu;
  std::optional<int> neighborhood, level_offset, depth;
  std::optional<long> voi_margin;
  bool paper_protocol = false;
};

void add_common(CLI::App *app, Flags &f)
{
  app->add_option("--config", f.config, "JSON config file; flags override its values");
  app->add_option("--out-dir", f.out_dir, "directory receiving all outputs (created if missing)");
  app->add_option("--threads", f.threads, "worker thread cap (default: $RENOVOR_THREADS or all cores)")
      ->check(CLI::PositiveNumber);
  app->add_option("--seed", f.seed, "RNG seed");
}

void add_vesselness(CLI::App *app, Flags &f)
{
  app->add_option("--scales", f.scales, "Gaussian scales in mm")->delimiter(',');
  app->add_option("--gamma12", f.gamma12, "Sato exponent gamma_12");
  app->add_option("--gamma23", f.gamma23, "Sato exponent gamma_23");
  app->add_option("--voi-margin", f.voi_margin, "kidney VOI margin in voxels");
}

void add_tensorcut(CLI::App *app, Flags &f)
{
  app->add_option("--omega", f.omega, "tensor term weight");
  app->add_option("--lambda-i", f.lambda_i, "intensity smoothness weight");
  app->add_option("--lambda-t", f.lambda_t, "tensor smoothness weight");
  app->add_option("--sigma-i", f.sigma_i, "intensity boundary scale (<= 0: self-tuned)");
  app->add_option("--sigma-t", f.sigma_t, "tensor boundary scale (<= 0: self-tuned)");
  app->add_option("--neighborhood", f.neighborhood, "MRF neighbourhood, 6 or 26");
  app->add_option("--fg-percentile", f.fg_pct, "foreground seed vesselness percentile");
  app->add_option("--bg-percentile", f.bg_pct, "background seed intensity percentile");
  app->add_option("--seed-exclusion-mm", f.excl_mm, "background seeds keep this distance from foreground seeds");
}

void add_tree(CLI::App *app, Flags &f)
{
  app->add_option("--root-hint", f.root_hint, "root position x,y,z in mm")->delimiter(',')->expected(3);
  app->add_option("--prune-spur-mm", f.prune_mm, "drop leaf spurs shorter than this");
}

void add_voronoi(CLI::App *app, Flags &f)
{
  app->add_option("--level-offset", f.level_offset, "branch clustering level offset");
  app->add_option("--margin-mm", f.margin_mm, "tumour margin for contact statistics");
}

Settings resolve(const Flags &f)
{
  Settings st;
  if (f.config) {
    Json j;
    try {
      j = Json::parse(read_text(*f.config));
    } catch (const Json::parse_error &e) {
      throw UsageError("config " + *f.config + ": " + e.what());
    }
    try {
      apply_config_json(j, st);
    } catch (const Json::type_error &e) {
      throw UsageError("config " + *f.config + ": " + e.what());
    }
  }
  auto &c = st.cfg;
  if (f.out_dir) c.out_dir = *f.out_dir;
  if (f.seed) c.seed = *f.seed;
  if (f.ct) c.ct = *f.ct;
  if (f.kidney) c.kidney = *f.kidney;
  if (f.tumor) c.tumor = fs::path(*f.tumor);
  if (f.vessels) st.vessels = *f.vessels;
  if (f.tree) st.tree = *f.tree;
  if (f.gt) st.gt = *f.gt;
  if (f.seg) st.seg = *f.seg;
  if (f.gt_centerline) st.gt_centerline = *f.gt_centerline;
  if (f.seg_centerline) st.seg_centerline = *f.seg_centerline;
  if (f.scales) c.vesselness.scales_mm = *f.scales;
  if (f.gamma12) c.vesselness.gamma12 = *f.gamma12;
  if (f.gamma23) c.vesselness.gamma23 = *f.gamma23;
  if (f.voi_margin) c.voi_margin_vox = *f.voi_margin;
  if (f.omega) c.energy.omega = *f.omega;
  if (f.lambda_i) c.energy.lambda_I = *f.lambda_i;
  if (f.lambda_t) c.energy.lambda_T = *f.lambda_t;
  if (f.sigma_i) c.energy.sigma_boundary_I = *f.sigma_i;
  if (f.sigma_t) c.energy.sigma_boundary_T = *f.sigma_t;
  if (f.neighborhood) c.energy.neighborhood = *f.neighborhood;
  if (f.fg_pct) c.seeds.foreground_vesselness_percentile = *f.fg_pct;
  if (f.bg_pct) c.seeds.background_intensity_percentile = *f.bg_pct;
  if (f.excl_mm) c.seeds.exclusion_mm = *f.excl_mm;
  if (f.root_hint) c.root_hint = Vec3{(*f.root_hint)[0], (*f.root_hint)[1], (*f.root_hint)[2]};
  if (f.prune_mm) c.tree.prune_spur_mm = *f.prune_mm;
  if (f.level_offset) c.level_offset = *f.level_offset;
  if (f.margin_mm) c.margin_mm = *f.margin_mm;
  if (f.paper_protocol) st.paper_protocol = true;
  if (f.noise_sigma) st.phantom.noise_sigma = *f.noise_sigma;
  if (f.vessel_hu) st.phantom.vessel_hu = *f.vessel_hu;
  if (f.depth) st.phantom.tree.depth = *f.depth;
  if (f.tumor_sphere) {
    const auto &t = *f.tumor_sphere;
    st.phantom.tumor = Sphere{{t[0], t[1], t[2]}, t[3]};
  }
  if (f.threads) set_thread_count(*f.threads);
  c.validate();
  return st;
}

// ---------------------------------------------------------------- outputs

/// Outputs are staged in memory and written only after every stage
/// succeeded, so a failing run leaves no partial results behind.
class OutputSet {
public:
  void volume(const std::string &name, const LabelVolume &v)
  {
    writers_.push_back([v, name](const fs::path &dir) { save_metaimage(v, dir / (name + ".mhd")); });
    files_.push_back(name + ".mhd");
    files_.push_back(name + ".raw");
  }
  void volume(const std::string &name, const ScalarVolume &v)
  {
    writers_.push_back([v, name](const fs::path &dir) { save_metaimage(v, dir / (name + ".mhd")); });
    files_.push_back(name + ".mhd");
    files_.push_back(name + ".raw");
  }
  void json(const std::string &name, const Json &j)
  {
    writers_.push_back([j, name](const fs::path &dir) { write_json(dir / name, j); });
    files_.push_back(name);
  }
  void text(const std::string &name, const std::string &t)
  {
    writers_.push_back([t, name](const fs::path &dir) { write_text(dir / name, t); });
    files_.push_back(name);
  }

  void commit(const fs::path &dir, const std::string &command, Json parameters) const
  {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    for (const auto &w : writers_) w(dir);
    write_json(dir / "run-manifest.json", make_manifest(command, parameters, dir, files_));
  }

private:
  std::vector<std::function<void(const fs::path &)>> writers_;
  std::vector<std::string> files_;
};

fs::path require_input(const fs::path &p, const char *what)
{
  if (p.empty()) throw UsageError(std::string("missing required input --") + what);
  if (!fs::exists(p)) throw IoError(std::string(what) + " file not found: " + p.string());
  return p;
}

/// Content hash of a MetaImage pair (or any single file).
std::string input_hash(const fs::path &p)
{
  std::string h = file_hash(p);
  if (p.extension() == ".mhd") {
    fs::path raw = p;
    raw.replace_extension(".raw");
    if (fs::exists(raw)) h += file_hash(raw);
  }
  return h;
}

LabelVolume load_mask(const fs::path &p, const char *what) { return load_labels(require_input(p, what)); }

// ---------------------------------------------------------------- commands

int cmd_phantom(const Settings &st)
{
  PhantomSpec spec = st.phantom;
  spec.seed = st.cfg.seed;
  const Phantom ph = generate_phantom(spec);
  OutputSet out;
  out.volume("ct", ph.ct);
  out.volume("kidney_gt", ph.kidney);
  out.volume("vessel_gt", ph.vessels);
  out.volume("centerline_gt", ph.centerline);
  out.json("tree_gt.json", tree_to_json(ph.tree));
  out.volume("partition_gt", ph.partition.labels);
  if (ph.tumor) out.volume("tumor_gt", *ph.tumor);
  out.commit(st.cfg.out_dir, "phantom", Json{{"seed", spec.seed}, {"phantom", phantom_json(spec)}});
  return 0;
}

Json inputs_json(std::initializer_list<std::pair<const char *, fs::path>> inputs)
{
  Json j = Json::object();
  for (const auto &[k, p] : inputs)
    if (!p.empty()) j[k] = input_hash(p);
  return j;
}

Json with_inputs(Json params, Json inputs)
{
  params["input_hashes"] = std::move(inputs);
  return params;
}

int cmd_vesselness(const Settings &st)
{
  const auto &c = st.cfg;
  const ScalarVolume ct = load_scalar(require_input(c.ct, "ct"));
  const LabelVolume kidney = load_mask(c.kidney, "kidney");
  OutputSet out;
  out.volume("vesselness", stage_vesselness(ct, kidney, c));
  out.commit(c.out_dir, "vesselness",
             with_inputs(parameters_json(c), inputs_json({{"ct", c.ct}, {"kidney", c.kidney}})));
  return 0;
}

int cmd_tensorcut(const Settings &st)
{
  const auto &c = st.cfg;
  const ScalarVolume ct = load_scalar(require_input(c.ct, "ct"));
  const LabelVolume kidney = load_mask(c.kidney, "kidney");
  OutputSet out;
  out.volume("vessels", stage_tensorcut(ct, kidney, c));
  out.commit(c.out_dir, "tensorcut",
             with_inputs(parameters_json(c), inputs_json({{"ct", c.ct}, {"kidney", c.kidney}})));
  return 0;
}

void emit_tree(OutputSet &out, const TreeStage &t)
{
  if (t.entry_count == 0) std::cerr << "warning: no centreline voxel enters the kidney mask\n";
  out.volume("centerline", t.centerline);
  out.json("tree.json", tree_to_json(t.tree));
}

int cmd_tree(const Settings &st)
{
  const auto &c = st.cfg;
  const LabelVolume vessels = load_mask(st.vessels, "vessels");
  const LabelVolume kidney = load_mask(c.kidney, "kidney");
  const TreeStage t = stage_tree(vessels, kidney, c);
  OutputSet out;
  emit_tree(out, t);
  out.commit(c.out_dir, "tree",
             with_inputs(parameters_json(c), inputs_json({{"vessels", st.vessels}, {"kidney", c.kidney}})));
  return 0;
}

void emit_voronoi(OutputSet &out, const VoronoiStage &v, bool tumor, double margin_mm)
{
  out.json("clustering.json", clustering_to_json(v.clustering));
  out.volume("partition", v.partition.labels);
  out.json("region_stats.json", region_stats_json(v.stats, tumor, margin_mm));
  out.text("region_stats.csv", region_stats_csv(v.stats));
}

int cmd_voronoi(const Settings &st)
{
  const auto &c = st.cfg;
  const LabelVolume kidney = load_mask(c.kidney, "kidney");
  const VesselTree tree = tree_from_json(read_json(require_input(st.tree, "tree")));
  std::optional<LabelVolume> tumor;
  if (c.tumor) tumor = load_mask(*c.tumor, "tumor");
  require_same_geometry(kidney.geometry(), tree.geometry, "voronoi");
  const VoronoiStage v = stage_voronoi(kidney, tree, tumor ? &*tumor : nullptr, c);
  OutputSet out;
  emit_voronoi(out, v, tumor.has_value(), c.margin_mm);
  out.commit(c.out_dir, "voronoi",
             with_inputs(parameters_json(c), inputs_json({{"kidney", c.kidney},
                                                          {"tree", st.tree},
                                                          {"tumor", c.tumor.value_or(fs::path{})}})));
  return 0;
}

int cmd_metrics(const Settings &st)
{
  const LabelVolume gt = load_mask(st.gt, "gt");
  const LabelVolume seg = load_mask(st.seg, "seg");
  std::optional<LabelVolume> gc, sc;
  if (!st.gt_centerline.empty()) gc = load_mask(st.gt_centerline, "gt-centerline");
  if (!st.seg_centerline.empty()) sc = load_mask(st.seg_centerline, "seg-centerline");
  const auto m = evaluate(gt, seg, gc ? &*gc : nullptr, sc ? &*sc : nullptr, st.paper_protocol);
  const Json j{{"dsc", m.dsc}, {"se", m.se}, {"hd_mm", m.hd_mm}, {"co", m.co}};
  OutputSet out;
  out.json("metrics.json", j);
  out.commit(st.cfg.out_dir, "metrics",
             Json{{"paper_protocol", st.paper_protocol},
                  {"input_hashes", inputs_json({{"gt", st.gt},
                                                {"seg", st.seg},
                                                {"gt_centerline", st.gt_centerline},
                                                {"seg_centerline", st.seg_centerline}})}});
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_pipeline(const Settings &st)
{
  const auto &c = st.cfg;
  const ScalarVolume ct = load_scalar(require_input(c.ct, "ct"));
  const LabelVolume kidney = load_mask(c.kidney, "kidney");
  std::optional<LabelVolume> tumor;
  if (c.tumor) tumor = load_mask(*c.tumor, "tumor");
  require_same_geometry(ct.geometry(), kidney.geometry(), "pipeline");
  if (tumor) require_same_geometry(ct.geometry(), tumor->geometry(), "pipeline");

  const ScalarVolume vesselness = stage_vesselness(ct, kidney, c);
  const LabelVolume vessels = stage_tensorcut(ct, kidney, c);
  const TreeStage t = stage_tree(vessels, kidney, c);
  const VoronoiStage v = stage_voronoi(kidney, t.tree, tumor ? &*tumor : nullptr, c);

  OutputSet out;
  out.volume("vesselness", vesselness);
  out.volume("vessels", vessels);
  emit_tree(out, t);
  emit_voronoi(out, v, tumor.has_value(), c.margin_mm);
  out.commit(c.out_dir, "pipeline",
             with_inputs(parameters_json(c), inputs_json({{"ct", c.ct},
                                                          {"kidney", c.kidney},
                                                          {"tumor", c.tumor.value_or(fs::path{})}})));
  return 0;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"renovor: renal artery segmentation and vascular territory estimation"};
  app.require_subcommand(1);
  Flags f;

  auto *phantom = app.add_subcommand("phantom", "generate a synthetic kidney + vessel tree phantom");
  add_common(phantom, f);
  phantom->add_option("--noise-sigma", f.noise_sigma, "Gaussian noise sigma (HU)");
  phantom->add_option("--vessel-hu", f.vessel_hu, "vessel intensity (HU)");
  phantom->add_option("--depth", f.depth, "tree depth (generations)");
  phantom->add_option("--tumor-sphere", f.tumor_sphere, "tumour sphere x,y,z,r in mm")->delimiter(',')->expected(4);

  auto *vesselness = app.add_subcommand("vesselness", "multiscale Sato vesselness inside the kidney VOI");
  add_common(vesselness, f);
  vesselness->add_option("--ct", f.ct, "CT volume (.mhd)");
  vesselness->add_option("--kidney", f.kidney, "kidney mask (.mhd)");
  add_vesselness(vesselness, f);

  auto *tensorcut = app.add_subcommand("tensorcut", "tensor-cut renal artery segmentation inside the kidney VOI");
  add_common(tensorcut, f);
  tensorcut->add_option("--ct", f.ct, "CT volume (.mhd)");
  tensorcut->add_option("--kidney", f.kidney, "kidney mask (.mhd)");
  add_vesselness(tensorcut, f);
  add_tensorcut(tensorcut, f);

  auto *tree = app.add_subcommand("tree", "centreline tree with kidney entries from a vessel mask");
  add_common(tree, f);
  tree->add_option("--vessels", f.vessels, "vessel mask (.mhd)");
  tree->add_option("--kidney", f.kidney, "kidney mask (.mhd)");
  add_tree(tree, f);

  auto *voronoi = app.add_subcommand("voronoi", "vascular dominant regions and their statistics");
  add_common(voronoi, f);
  voronoi->add_option("--kidney", f.kidney, "kidney mask (.mhd)");
  voronoi->add_option("--tree", f.tree, "tree JSON written by `tree`");
  voronoi->add_option("--tumor", f.tumor, "tumour mask (.mhd)");
  add_voronoi(voronoi, f);

  auto *metrics = app.add_subcommand("metrics", "DSC, Se, HD and centreline overlap of a segmentation");
  add_common(metrics, f);
  metrics->add_option("--gt", f.gt, "ground-truth mask (.mhd)");
  metrics->add_option("--seg", f.seg, "segmentation mask (.mhd)");
  metrics->add_option("--gt-centerline", f.gt_centerline, "ground-truth centreline mask (default: skeleton of --gt)");
  metrics->add_option("--seg-centerline", f.seg_centerline,
                      "segmentation centreline mask (default: skeleton of --seg)");
  metrics->add_flag("--paper-protocol", f.paper_protocol, "keep the two largest components of each mask before HD");

  auto *pipeline = app.add_subcommand("pipeline", "vesselness, tensorcut, tree and voronoi in one run");
  add_common(pipeline, f);
  pipeline->add_option("--ct", f.ct, "CT volume (.mhd)");
  pipeline->add_option("--kidney", f.kidney, "kidney mask (.mhd)");
  pipeline->add_option("--tumor", f.tumor, "tumour mask (.mhd)");
  add_vesselness(pipeline, f);
  add_tensorcut(pipeline, f);
  add_tree(pipeline, f);
  add_voronoi(pipeline, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const Settings st = resolve(f);
    if (*phantom) return cmd_phantom(st);
    if (*vesselness) return cmd_vesselness(st);
    if (*tensorcut) return cmd_tensorcut(st);
    if (*tree) return cmd_tree(st);
    if (*voronoi) return cmd_voronoi(st);
    if (*metrics) return cmd_metrics(st);
    if (*pipeline) return cmd_pipeline(st);
  } catch (const DataError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NotSpdError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument &e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
