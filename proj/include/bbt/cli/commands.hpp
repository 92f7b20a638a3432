#pragma once

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "bbt/bbt.hpp"
#include "bbt/cli/config.hpp"
#include "bbt/cli/output.hpp"

namespace bbt::cli {

inline constexpr const char* kFormatVersions = "manifest=1 ckpt-tags=1 nbest=1 psnap=PSNAP1 curves=1";

inline const std::vector<CommandSpec>& command_specs() {
  const OptionSpec seed{"seed", Kind::integer, "random seed", "0", false, Bound::non_negative, {}};
  static const std::vector<CommandSpec> specs{
      {"schedule",
       "compile a block or mixed training schedule into a manifest and checkpoint tags",
       {{"regime", Kind::choice, "block or mixed", std::nullopt, true, Bound::none, {"block", "mixed"}},
        {"block-size", Kind::integer, "updates per block (block regime)", std::nullopt, false, Bound::positive, {}},
        {"total", Kind::integer, "total updates", std::nullopt, true, Bound::positive, {}},
        {"ckpt-interval", Kind::integer, "updates between checkpoints", "5000", false, Bound::positive, {}},
        {"output", Kind::path, "manifest TSV", std::nullopt, true, Bound::none, {}},
        {"tags-output", Kind::path, "checkpoint tag TSV", std::nullopt, false, Bound::none, {}},
        seed}},
      {"stream",
       "emit the batch stream a manifest induces over the given corpora",
       {{"manifest", Kind::path, "manifest TSV", std::nullopt, true, Bound::none, {}},
        {"auth", Kind::path, "authentic parallel corpus", std::nullopt, false, Bound::none, {}},
        {"bt", Kind::path, "backtranslated corpus", std::nullopt, false, Bound::none, {}},
        {"ft", Kind::path, "forward-translated corpus", std::nullopt, false, Bound::none, {}},
        {"batch-size", Kind::integer, "sentence pairs per update", std::nullopt, true, Bound::positive, {}},
        {"limit", Kind::integer, "stop after this many updates (0 = all)", "0", false, Bound::non_negative, {}},
        {"output", Kind::path, "TSV update, block, dataset, source, target", std::nullopt, true, Bound::none, {}},
        seed}},
      {"smooth",
       "replay exponential smoothing over a stream of per-update snapshots",
       {{"input", Kind::paths, "snapshots ordered by consecutive update", std::nullopt, true, Bound::none, {}},
        {"alpha", Kind::real, "smoothing factor", "0.001", false, Bound::unit_open, {}},
        {"emit-every", Kind::integer, "emit smoothed snapshot every N updates", std::nullopt, true, Bound::positive, {}},
        {"bias-correction", Kind::flag, "divide by 1-(1-alpha)^t", std::nullopt, false, Bound::none, {}},
        {"output-dir", Kind::path, "directory for smoothed_<update>.psnap", std::nullopt, true, Bound::none, {}},
        seed}},
      {"avgk",
       "average the last k snapshots",
       {{"input", Kind::paths, "snapshots ordered by update", std::nullopt, true, Bound::none, {}},
        {"k", Kind::integer, "window size", "8", false, Bound::positive, {}},
        {"output", Kind::path, "averaged snapshot", std::nullopt, true, Bound::none, {}},
        seed}},
      {"mbr",
       "MBR-rerank the concatenation of n-best lists",
       {{"nbest", Kind::paths, "n-best lists; order defines checkpoint order", std::nullopt, true, Bound::none, {}},
        {"tags", Kind::path, "checkpoint tag TSV", std::nullopt, false, Bound::none, {}},
        {"utility", Kind::choice, "utility metric", "chrf", false, Bound::none, {"chrf", "sbleu"}},
        {"output", Kind::path, "selected translations", std::nullopt, true, Bound::none, {}},
        {"dump-scores", Kind::path, "TSV sentence_index, chosen_pool_index, consensus", std::nullopt, false, Bound::none, {}},
        seed}},
      {"combsearch",
       "rank all per-block-type checkpoint combinations by MBR result",
       {{"nbest", Kind::paths, "n-best lists named <checkpoint_id>.*", std::nullopt, true, Bound::none, {}},
        {"tags", Kind::path, "checkpoint tag TSV", std::nullopt, true, Bound::none, {}},
        {"utility", Kind::choice, "utility metric", "chrf", false, Bound::none, {"chrf", "sbleu"}},
        {"total-k", Kind::integer, "number of n-best lists per pool", std::nullopt, true, Bound::positive, {}},
        {"scores", Kind::path, "one external score per --nbest file, same order", std::nullopt, false, Bound::none, {}},
        {"refs", Kind::path, "references for scoring the reranked output", std::nullopt, false, Bound::none, {}},
        {"allow-fewer", Kind::flag, "also evaluate pools of fewer than total-k lists", std::nullopt, false, Bound::none, {}},
        {"output", Kind::path, "ranked TSV auth, bt, ft, score", std::nullopt, true, Bound::none, {}},
        seed}},
      {"score",
       "score hypotheses against references",
       {{"hyp", Kind::path, "hypotheses, one per line", std::nullopt, true, Bound::none, {}},
        {"ref", Kind::path, "references, one per line", std::nullopt, true, Bound::none, {}},
        {"metric", Kind::choice, "bleu (corpus, 0-100), chrf or sbleu (mean sentence score)", "bleu", false, Bound::none,
         {"bleu", "chrf", "sbleu"}},
        {"dump", Kind::path, "per-sentence scores", std::nullopt, false, Bound::none, {}},
        seed}},
      {"ne-acc",
       "named-entity translation accuracy",
       {{"hyp", Kind::path, "hypotheses, one per line", std::nullopt, true, Bound::none, {}},
        {"testset", Kind::path, "TSV source, reference, entity", std::nullopt, true, Bound::none, {}},
        {"dump", Kind::path, "per-sentence 0/1 matches", std::nullopt, false, Bound::none, {}},
        seed}},
      {"toytrain",
       "train a least-squares toy model under a block or mixed schedule",
       {{"regime", Kind::choice, "block or mixed", "block", false, Bound::none, {"block", "mixed"}},
        {"block-size", Kind::integer, "updates per block", "200", false, Bound::positive, {}},
        {"total", Kind::integer, "total updates", "8000", false, Bound::positive, {}},
        {"ckpt-interval", Kind::integer, "updates between checkpoints", "25", false, Bound::positive, {}},
        {"lr", Kind::real, "SGD learning rate", "0.05", false, Bound::positive, {}},
        {"batch-size", Kind::integer, "examples per update", "8", false, Bound::positive, {}},
        {"alpha", Kind::real, "smoothing factor", "0.001", false, Bound::unit_open, {}},
        {"avg-k", Kind::integer, "checkpoints per average", "8", false, Bound::positive, {}},
        {"eval-every", Kind::integer, "updates between evaluations", "25", false, Bound::positive, {}},
        {"dim", Kind::integer, "parameter dimension", "8", false, Bound::positive, {}},
        {"domain-shift", Kind::real, "distance between domain optima", "1.0", false, Bound::non_negative, {}},
        {"noise", Kind::real, "label noise sigma", "0.1", false, Bound::non_negative, {}},
        {"train-size", Kind::integer, "training examples per domain", "2000", false, Bound::positive, {}},
        {"eval-size", Kind::integer, "evaluation examples per domain", "500", false, Bound::positive, {}},
        {"output", Kind::path, "curve CSV update,variant,domain,loss", std::nullopt, true, Bound::none, {}},
        {"manifest-output", Kind::path, "manifest TSV", std::nullopt, false, Bound::none, {}},
        {"snapshot-dir", Kind::path, "directory for raw and smoothed checkpoints", std::nullopt, false, Bound::none, {}},
        seed}},
      {"early-stop",
       "find where validation stopped improving",
       {{"scores", Kind::path, "one validation score per line", std::nullopt, true, Bound::none, {}},
        {"patience", Kind::integer, "evaluations without improvement", "30", false, Bound::positive, {}},
        {"mode", Kind::choice, "max or min", "max", false, Bound::none, {"max", "min"}},
        seed}},
  };
  return specs;
}

inline const CommandSpec& command_spec(std::string_view name) {
  for (const auto& s : command_specs())
    if (s.name == name) return s;
  throw InputError("unknown command '" + std::string(name) + "'");
}

// Summary line of `key=value` pairs.
class Summary {
 public:
  explicit Summary(const std::string& command) { add("command", command); }
  template <class T>
  Summary& add(const std::string& key, const T& value) {
    if (!line_.empty()) line_ += ' ';
    line_ += key + "=";
    if constexpr (std::is_floating_point_v<T>) {
      line_ += text::format_real(value);
    } else if constexpr (std::is_arithmetic_v<T>) {
      line_ += std::to_string(value);
    } else {
      line_ += std::string(value);
    }
    return *this;
  }
  const std::string& str() const { return line_; }

 private:
  std::string line_;
};

namespace detail {

inline Summary run_schedule(const RunConfig& c, OutputSet& out, std::ostream& err) {
  const auto regime = *parse_regime(c.text("regime"));
  ScheduleManifest m;
  if (regime == Regime::block) {
    if (!c.has("block-size")) throw InputError("schedule: key 'block-size' is required for the block regime");
    m = compile_block_schedule(c.integer("block-size"), c.integer("total"), c.integer("ckpt-interval"));
  } else {
    m = compile_mixed_schedule(c.integer("total"), c.integer("ckpt-interval"));
  }
  for (const auto& w : m.warnings) err << "warning: " << w << "\n";
  const auto tags = m.checkpoints();
  out.add(c.text("output"), format_manifest(m));
  if (c.has("tags-output")) out.add(c.text("tags-output"), format_checkpoint_tags(tags));
  Summary s("schedule");
  s.add("regime", to_string(m.regime)).add("entries", m.entries.size()).add("checkpoints", tags.size());
  return s.add("warnings", m.warnings.size()).add("output", c.text("output"));
}

inline Summary run_stream(const RunConfig& c, OutputSet& out, std::ostream&) {
  const auto m = load_manifest(c.text("manifest"));
  std::map<DatasetTag, Corpus> corpora;
  for (auto t : kAllDatasets)
    if (const auto p = c.optional_text(std::string(to_string(t)))) corpora.emplace(t, load_parallel(*p, t));
  auto stream = batch_stream(m, corpora, static_cast<std::size_t>(c.integer("batch-size")), c.seed());
  const auto limit = c.integer("limit");
  std::string body;
  std::size_t updates = 0;
  std::size_t pairs = 0;
  while (auto b = stream.next()) {
    if (limit > 0 && static_cast<std::int64_t>(updates) >= limit) break;
    for (const auto& p : b->pairs)
      body += std::to_string(b->update) + "\t" + std::string(to_string(b->block)) + "\t" + std::string(to_string(p.dataset)) +
              "\t" + p.source + "\t" + p.target + "\n";
    ++updates;
    pairs += b->pairs.size();
  }
  out.add(c.text("output"), std::move(body));
  return std::move(Summary("stream").add("updates", updates).add("pairs", pairs).add("output", c.text("output")));
}

inline std::vector<ParamSnapshot> load_snapshots(const std::vector<std::string>& paths) {
  std::vector<ParamSnapshot> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(load_snapshot(p));
  return out;
}

inline Summary run_smooth(const RunConfig& c, OutputSet& out, std::ostream&) {
  const auto snapshots = load_snapshots(c.paths("input"));
  const auto emitted =
      replay_smoothing(snapshots, ReplayOptions{c.real("alpha"), c.integer("emit-every"), c.flag("bias-correction")});
  const std::filesystem::path dir(c.text("output-dir"));
  for (const auto& s : emitted)
    out.add((dir / ("smoothed_" + std::to_string(s.update) + ".psnap")).string(), serialize_snapshot(s));
  return std::move(Summary("smooth").add("inputs", snapshots.size()).add("emitted", emitted.size()).add("output_dir", dir.string()));
}

inline Summary run_avgk(const RunConfig& c, OutputSet& out, std::ostream&) {
  const auto snapshots = load_snapshots(c.paths("input"));
  const auto avg = average_consecutive(snapshots, static_cast<std::size_t>(c.integer("k")));
  out.add(c.text("output"), serialize_snapshot(avg));
  Summary s("avgk");
  s.add("k", c.integer("k")).add("update", avg.update).add("spans_blocks", avg.tag && avg.tag->spans_blocks ? 1 : 0);
  return s.add("output", c.text("output"));
}

inline std::map<CheckpointId, BlockType> load_tag_map(const std::string& path) {
  std::map<CheckpointId, BlockType> out;
  for (const auto& t : load_checkpoint_tags(path)) out[t.checkpoint_id] = t.block_type;
  return out;
}

inline Summary run_mbr(const RunConfig& c, OutputSet& out, std::ostream&) {
  std::vector<NBestList> lists;
  for (const auto& p : c.paths("nbest")) lists.push_back(load_nbest(p));
  const auto types = c.has("tags") ? load_tag_map(c.text("tags")) : std::map<CheckpointId, BlockType>{};
  const auto pool = concatenate_nbest(lists, types);
  const auto result = mbr_rerank(pool, make_utility(c.text("utility")));
  std::string body;
  for (const auto& s : result.sentences) body += s.chosen.text + "\n";
  out.add(c.text("output"), std::move(body));
  if (c.has("dump-scores")) {
    std::string dump;
    for (std::size_t i = 0; i < result.sentences.size(); ++i)
      dump += std::to_string(i) + "\t" + std::to_string(result.sentences[i].pool_index) + "\t" +
              text::format_real(result.sentences[i].consensus) + "\n";
    out.add(c.text("dump-scores"), std::move(dump));
  }
  Summary s("mbr");
  s.add("lists", lists.size()).add("sentences", pool.num_sentences()).add("utility", c.text("utility"));
  return s.add("mean_consensus", result.mean_consensus).add("output", c.text("output"));
}

inline Summary run_combsearch(const RunConfig& c, OutputSet& out, std::ostream&) {
  const auto& paths = c.paths("nbest");
  const auto all_tags = load_checkpoint_tags(c.text("tags"));
  std::map<CheckpointId, CheckpointTag> tag_by_id;
  for (const auto& t : all_tags) tag_by_id[t.checkpoint_id] = t;

  std::map<CheckpointId, NBestList> store;
  std::vector<CheckpointTag> tags;
  for (const auto& p : paths) {
    auto list = load_nbest(p);
    auto it = tag_by_id.find(list.origin);
    if (it == tag_by_id.end()) throw InputError(p + ": checkpoint '" + list.origin + "' not found in " + c.text("tags"));
    if (store.count(list.origin)) throw InputError(p + ": checkpoint '" + list.origin + "' given twice");
    tags.push_back(it->second);
    store.emplace(list.origin, std::move(list));
  }
  std::map<CheckpointId, double> scores;
  if (c.has("scores")) {
    const auto report = load_external_scores(c.text("scores"));
    if (report.per_sentence.size() != paths.size())
      throw InputError(c.text("scores") + ": " + std::to_string(report.per_sentence.size()) + " scores for " +
                       std::to_string(paths.size()) + " n-best lists");
    for (std::size_t i = 0; i < tags.size(); ++i) scores[tags[i].checkpoint_id] = report.per_sentence[i];
  }
  std::optional<std::vector<std::string>> refs;
  if (c.has("refs")) refs = load_lines(c.text("refs"));
  const auto available = sort_checkpoints(tags, scores);
  const auto ranked = combination_search(available, static_cast<std::size_t>(c.integer("total-k")), store,
                                         make_utility(c.text("utility")), refs, c.flag("allow-fewer"));
  std::string body = "auth\tbt\tft\tscore\n";
  for (const auto& r : ranked)
    body += std::to_string(r.spec.counts[0]) + "\t" + std::to_string(r.spec.counts[1]) + "\t" +
            std::to_string(r.spec.counts[2]) + "\t" + text::format_real(r.score) + "\n";
  out.add(c.text("output"), std::move(body));
  Summary s("combsearch");
  s.add("evaluated", ranked.size()).add("best", to_string(ranked.front().spec)).add("best_score", ranked.front().score);
  return s.add("output", c.text("output"));
}

inline Summary run_score(const RunConfig& c, OutputSet& out, std::ostream&) {
  const auto hyps = load_lines(c.text("hyp"));
  const auto refs = load_lines(c.text("ref"));
  if (hyps.size() != refs.size())
    throw InputError("score: " + std::to_string(hyps.size()) + " hypotheses vs " + std::to_string(refs.size()) + " references");
  if (hyps.empty()) throw InputError("score: empty input");
  const auto& metric = c.text("metric");
  ScoreReport report{metric, 0.0, {}, std::nullopt};
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    if (metric == "chrf") report.per_sentence.push_back(chrf(hyps[i], refs[i]));
    else report.per_sentence.push_back((metric == "bleu" ? 100.0 : 1.0) * sentence_bleu(hyps[i], refs[i]));
  }
  if (metric == "bleu") {
    report.corpus_score = corpus_bleu(hyps, refs);
  } else {
    for (double v : report.per_sentence) report.corpus_score += v;
    report.corpus_score /= static_cast<double>(hyps.size());
  }
  if (c.has("dump")) {
    std::string dump = "# metric=" + metric + "\n";
    for (double v : report.per_sentence) dump += text::format_real(v) + "\n";
    out.add(c.text("dump"), std::move(dump));
  }
  return std::move(Summary("score").add("metric", metric).add("sentences", hyps.size()).add("score", report.corpus_score));
}

inline Summary run_ne_acc(const RunConfig& c, OutputSet& out, std::ostream&) {
  const auto hyps = load_lines(c.text("hyp"));
  const auto cases = load_ne_testset(c.text("testset"));
  const auto hits = ne_matches(hyps, cases);
  const auto matched = static_cast<std::size_t>(std::count(hits.begin(), hits.end(), true));
  if (c.has("dump")) {
    std::string dump = "# metric=ne-acc\n";
    for (bool h : hits) dump += h ? "1\n" : "0\n";
    out.add(c.text("dump"), std::move(dump));
  }
  return std::move(Summary("ne-acc").add("cases", cases.size()).add("matched", matched).add("accuracy", ne_accuracy(hyps, cases)));
}

inline Summary run_toytrain(const RunConfig& c, OutputSet& out, std::ostream& err) {
  ToyConfig cfg;
  const auto regime = *parse_regime(c.text("regime"));
  cfg.manifest = regime == Regime::block
                     ? compile_block_schedule(c.integer("block-size"), c.integer("total"), c.integer("ckpt-interval"))
                     : compile_mixed_schedule(c.integer("total"), c.integer("ckpt-interval"));
  for (const auto& w : cfg.manifest.warnings) err << "warning: " << w << "\n";
  cfg.lr = c.real("lr");
  cfg.batch_size = static_cast<std::size_t>(c.integer("batch-size"));
  cfg.alpha = c.real("alpha");
  cfg.avg_k = static_cast<std::size_t>(c.integer("avg-k"));
  cfg.eval_every = c.integer("eval-every");
  cfg.seed = c.seed();
  const auto domains = make_domains(static_cast<std::size_t>(c.integer("dim")), c.real("domain-shift"), c.real("noise"),
                                    static_cast<std::size_t>(c.integer("train-size")),
                                    static_cast<std::size_t>(c.integer("eval-size")), c.seed());
  const auto result = run_toy_experiment(domains, cfg);
  out.add(c.text("output"), format_curve_csv(result.curve));
  if (c.has("manifest-output")) out.add(c.text("manifest-output"), format_manifest(cfg.manifest));
  if (c.has("snapshot-dir")) {
    const std::filesystem::path dir(c.text("snapshot-dir"));
    for (const auto& s : result.checkpoints)
      out.add((dir / ("raw_" + std::to_string(s.update) + ".psnap")).string(), serialize_snapshot(s));
    for (const auto& s : result.smoothed_checkpoints)
      out.add((dir / ("exp_" + std::to_string(s.update) + ".psnap")).string(), serialize_snapshot(s));
  }
  Summary s("toytrain");
  s.add("regime", to_string(regime)).add("points", result.curve.size() / kAllVariants.size());
  s.add("checkpoints", result.checkpoints.size());
  if (!result.curve.empty()) {
    s.add("final_raw", result.variant(Variant::raw).back().mean_loss());
    s.add("final_exp", result.variant(Variant::exp).back().mean_loss());
    s.add("final_avgk", result.variant(Variant::avgk).back().mean_loss());
  }
  return s.add("output", c.text("output"));
}

inline Summary run_early_stop(const RunConfig& c, OutputSet&, std::ostream&) {
  const auto report = load_external_scores(c.text("scores"));
  const auto mode = c.text("mode") == "max" ? StopMode::max : StopMode::min;
  const auto stop = early_stop(report.per_sentence, static_cast<std::size_t>(c.integer("patience")), mode);
  const auto& v = report.per_sentence;
  const auto best = mode == StopMode::max ? std::max_element(v.begin(), v.end()) : std::min_element(v.begin(), v.end());
  Summary s("early-stop");
  s.add("evaluations", v.size()).add("stop_index", stop ? std::to_string(*stop) : std::string("none"));
  return s.add("best_index", static_cast<std::size_t>(best - v.begin())).add("best_score", *best);
}

}  // namespace detail

// Runs a validated command; outputs are published only if it succeeds.
inline std::string run(const RunConfig& config, std::ostream& err = std::cerr) {
  OutputSet out;
  const auto& cmd = config.command();
  Summary summary("?");
  if (cmd == "schedule") summary = detail::run_schedule(config, out, err);
  else if (cmd == "stream") summary = detail::run_stream(config, out, err);
  else if (cmd == "smooth") summary = detail::run_smooth(config, out, err);
  else if (cmd == "avgk") summary = detail::run_avgk(config, out, err);
  else if (cmd == "mbr") summary = detail::run_mbr(config, out, err);
  else if (cmd == "combsearch") summary = detail::run_combsearch(config, out, err);
  else if (cmd == "score") summary = detail::run_score(config, out, err);
  else if (cmd == "ne-acc") summary = detail::run_ne_acc(config, out, err);
  else if (cmd == "toytrain") summary = detail::run_toytrain(config, out, err);
  else if (cmd == "early-stop") summary = detail::run_early_stop(config, out, err);
  else throw InputError("unknown command '" + cmd + "'");
  out.commit();
  return summary.str();
}

inline std::string top_level_usage() {
  std::string out = "usage: bbt <command> [--config FILE] [options]\n       bbt --version\n\ncommands:\n";
  for (const auto& s : command_specs()) out += "  " + s.name + std::string(12 - std::min<std::size_t>(11, s.name.size()), ' ') + s.summary + "\n";
  return out;
}

// Entry point shared by the binary and the tests. Exit status: 0 success,
// 1 input or validation error, 2 runtime error.
inline int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    if (args.empty() || args[0] == "--help" || args[0] == "-h") {
      (args.empty() ? err : out) << top_level_usage();
      return args.empty() ? 1 : 0;
    }
    if (args[0] == "--version") {
      out << "bbt " << kVersion << " (" << kFormatVersions << ")\n";
      return 0;
    }
    const auto& spec = command_spec(args[0]);
    const auto parsed = parse_args(spec, std::vector<std::string>(args.begin() + 1, args.end()));
    if (parsed.help) {
      out << usage(spec);
      return 0;
    }
    const RawValues file_values = parsed.config_path ? load_config_values(*parsed.config_path) : RawValues{};
    const auto config = resolve_config(spec, file_values, parsed.flags);
    out << run(config, err) << "\n";
    return 0;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace bbt::cli
