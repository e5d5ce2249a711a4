// msf-seg: reproducible experiment pipeline around the minimum-spanning-
// forest segmentation engine. Subcommands: generate, pretrain-g, train,
// segment, evaluate, report. Every command reads a line-based `key = value`
// config, rejects unknown keys, and writes the fully resolved config next
// to its outputs. Exit codes: 0 success, 2 bad inputs/config, 3 numeric
// blow-up (last checkpoint preserved).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "msfseg/config.hpp"
#include "msfseg/grid.hpp"
#include "msfseg/grow.hpp"
#include "msfseg/io.hpp"
#include "msfseg/metrics.hpp"
#include "msfseg/models.hpp"
#include "msfseg/synthdata.hpp"
#include "msfseg/trainer.hpp"

namespace fs = std::filesystem;
using namespace msfseg;

namespace {

std::string pad_id(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04u", static_cast<unsigned>(i % 100000));
    return buf;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_pm(double mean, double stddev) {
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%.4f \xc2\xb1 %.4f", mean, stddev);
    return buf;
}

void check_lwa1(const fs::path& p) {
    if (!validate_lwa1_header(p))
        throw std::runtime_error("output failed LWA1 header validation: " + p.string());
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, ',')) {
        const auto a = item.find_first_not_of(" \t");
        const auto b = item.find_last_not_of(" \t");
        if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
    }
    return out;
}

struct CorpusItem {
    std::string id;
    Image image;
    Segmentation gt;
    SeedSet seeds;
};

std::vector<std::string> corpus_ids(const fs::path& dir) {
    std::vector<std::string> ids;
    const fs::path manifest = dir / "manifest.csv";
    if (fs::exists(manifest)) {
        std::ifstream is(manifest);
        std::string line;
        std::getline(is, line);  // header
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            ids.push_back(line.substr(0, line.find(',')));
        }
        return ids;
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        const auto pos = name.find("_image.lwa1");
        if (pos != std::string::npos && pos + 11 == name.size())
            ids.push_back(name.substr(0, pos));
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<CorpusItem> load_corpus(const fs::path& dir) {
    if (!fs::is_directory(dir))
        throw std::runtime_error("corpus directory does not exist: " + dir.string());
    std::vector<CorpusItem> corpus;
    for (const std::string& id : corpus_ids(dir)) {
        Image img = load_image(dir / (id + "_image.lwa1"));
        Segmentation gt = load_labels(dir / (id + "_gt.lwa1"));
        SeedSet seeds = load_seeds_csv(dir / (id + "_seeds.csv"), gt.graph);
        corpus.push_back({id, std::move(img), std::move(gt), std::move(seeds)});
    }
    if (corpus.empty()) throw std::runtime_error("corpus is empty: " + dir.string());
    return corpus;
}

// ---------------------------------------------------------------- generate

constexpr const char* kGenerateKeys[] = {"count",      "size",       "sigma_noise",
                                         "sigma_process", "sigma_blur", "seed"};

int cmd_generate(RunConfig cfg, const fs::path& out) {
    cfg.require_known(kGenerateKeys);
    const long long count = cfg.get_int("count");
    const long long size = cfg.get_int("size", 64);
    const double sigma_noise = cfg.get_double("sigma_noise", 0.3);
    const double sigma_process = cfg.get_double("sigma_process", 0.0);
    const double sigma_blur = cfg.get_double("sigma_blur", 1.0);
    const std::uint64_t seed = cfg.get_seed("seed", 0);
    if (count < 1) throw std::runtime_error("generate: count must be positive");

    fs::create_directories(out);
    std::ofstream manifest(out / "manifest.csv", std::ios::trunc);
    manifest << "id,sigma_noise,rng_seed\n";
    for (long long i = 0; i < count; ++i) {
        SynthConfig sc;
        sc.height = static_cast<int>(size);
        sc.width = static_cast<int>(size);
        sc.sigma_noise = sigma_noise;
        sc.sigma_process = sigma_process;
        sc.sigma_blur = sigma_blur;
        sc.rng_seed = seed + static_cast<std::uint64_t>(i);
        auto [img, gt] = generate(sc);
        const SeedSet seeds = seed_oracle(gt);
        const std::string id = pad_id(static_cast<std::size_t>(i));
        save_image(out / (id + "_image.lwa1"), img);
        save_labels(out / (id + "_gt.lwa1"), gt);
        save_seeds_csv(out / (id + "_seeds.csv"), gt.graph, seeds);
        check_lwa1(out / (id + "_image.lwa1"));
        check_lwa1(out / (id + "_gt.lwa1"));
        manifest << id << ',' << fmt(sigma_noise) << ',' << sc.rng_seed << '\n';
    }
    manifest.close();
    cfg.write_resolved(out / "resolved_generate.config");
    return 0;
}

// --------------------------------------------------------------- pretrain-g

constexpr const char* kPretrainKeys[] = {"corpus",        "patch_radius", "hidden_width",
                                         "learning_rate", "steps",        "batch_size",
                                         "seed"};

int cmd_pretrain_g(RunConfig cfg, const fs::path& out) {
    cfg.require_known(kPretrainKeys);
    const fs::path corpus_dir = cfg.get_string("corpus");
    GTrainConfig gc;
    gc.patch_radius = static_cast<int>(cfg.get_int("patch_radius", 3));
    gc.hidden_width = static_cast<int>(cfg.get_int("hidden_width", 32));
    gc.learning_rate = cfg.get_double("learning_rate", 0.05);
    gc.steps = static_cast<int>(cfg.get_int("steps", 2000));
    gc.batch_size = static_cast<int>(cfg.get_int("batch_size", 32));
    gc.rng_seed = cfg.get_seed("seed", 0);

    const std::vector<CorpusItem> corpus = load_corpus(corpus_dir);
    std::vector<std::pair<Image, Segmentation>> pairs;
    pairs.reserve(corpus.size());
    for (const auto& c : corpus) pairs.emplace_back(c.image, c.gt);

    const GTrainResult result = train_g(pairs, gc);

    fs::create_directories(out);
    save_model(out / "g.model", result.params);
    std::ofstream trace(out / "g_loss.csv", std::ios::trunc);
    trace << "step,loss\n";
    for (std::size_t i = 0; i < result.loss_trace.size(); ++i)
        trace << i << ',' << fmt(result.loss_trace[i]) << '\n';
    cfg.write_resolved(out / "resolved_pretrain-g.config");
    return 0;
}

// -------------------------------------------------------------------- train

constexpr const char* kTrainKeys[] = {"corpus",        "g_model",        "model_kind",
                                      "learning_rate", "momentum",       "gamma",
                                      "weight_mode",   "epochs",         "workers",
                                      "seed",          "patch_radius",   "hidden_width",
                                      "recurrent_size", "bptt_truncation", "checkpoint_every"};

int cmd_train(RunConfig cfg, const fs::path& out) {
    cfg.require_known(kTrainKeys);
    const fs::path corpus_dir = cfg.get_string("corpus");
    const fs::path g_path = cfg.get_string("g_model");
    if (!fs::exists(g_path))
        throw std::runtime_error("train requires a pretrained g model; missing " +
                                 g_path.string());

    TrainConfig tc;
    const std::string kind = cfg.get_string("model_kind", "static");
    if (kind == "static") tc.model_kind = ModelKind::Static;
    else if (kind == "dynamic") tc.model_kind = ModelKind::Dynamic;
    else throw std::runtime_error("train: model_kind must be static or dynamic");
    const std::string wmode = cfg.get_string("weight_mode", "discounted");
    if (wmode == "binary") tc.weight_mode = WeightMode::Binary;
    else if (wmode == "discounted") tc.weight_mode = WeightMode::Discounted;
    else throw std::runtime_error("train: weight_mode must be binary or discounted");
    tc.learning_rate = cfg.get_double("learning_rate", 1e-2);
    tc.momentum = cfg.get_double("momentum", 0.9);
    tc.gamma = cfg.get_double("gamma", 0.7);
    tc.epochs = static_cast<int>(cfg.get_int("epochs", 1));
    tc.workers = static_cast<int>(cfg.get_int("workers", 1));
    tc.rng_seed = cfg.get_seed("seed", 0);
    tc.patch_radius = static_cast<int>(cfg.get_int("patch_radius", 3));
    tc.hidden_width = static_cast<int>(cfg.get_int("hidden_width", 32));
    tc.recurrent_size = static_cast<int>(cfg.get_int("recurrent_size", 16));
    tc.bptt_truncation = static_cast<int>(cfg.get_int("bptt_truncation", 32));
    const int checkpoint_every = static_cast<int>(cfg.get_int("checkpoint_every", 0));

    const ModelParams g_params = load_model(g_path);
    const std::vector<CorpusItem> corpus = load_corpus(corpus_dir);
    std::vector<TrainInstance> instances;
    instances.reserve(corpus.size());
    for (const auto& c : corpus)
        instances.push_back({augment(c.image, g_params), c.gt, c.seeds});

    fs::create_directories(out);
    cfg.write_resolved(out / "resolved_train.config");

    auto checkpoint = [&](int step, const ModelParams& p) {
        char name[64];
        std::snprintf(name, sizeof(name), "theta_%06d.model", step);
        save_model(out / name, p);
    };

    const FitResult result =
        fit(instances, tc, checkpoint_every > 0 ? CheckpointFn(checkpoint) : CheckpointFn(),
            checkpoint_every);

    save_model(out / "theta.model", result.params);
    std::ofstream trace(out / "trace.csv", std::ios::trunc);
    trace << "step,loss,perceptron_loss,incorrect_count,gradient_norm,arand\n";
    for (std::size_t i = 0; i < result.stats.size(); ++i) {
        const EpochStats& s = result.stats[i];
        trace << i << ',' << fmt(s.loss) << ',' << fmt(s.perceptron_loss) << ','
              << s.incorrect_count << ',' << fmt(s.gradient_norm) << ',' << fmt(s.arand)
              << '\n';
    }
    return 0;
}

// ------------------------------------------------------------------ segment

constexpr const char* kSegmentKeys[] = {"corpus", "method",       "model",
                                        "g_model", "smooth_sigma", "threshold"};

int cmd_segment(RunConfig cfg, const fs::path& out) {
    cfg.require_known(kSegmentKeys);
    const fs::path corpus_dir = cfg.get_string("corpus");
    const std::string method = cfg.get_string("method", "learned");
    const std::vector<CorpusItem> corpus = load_corpus(corpus_dir);

    fs::create_directories(out);

    ModelParams model, g_params;
    bool have_model = false, have_g = false;
    if (method == "learned") {
        model = load_model(cfg.get_string("model"));
        g_params = load_model(cfg.get_string("g_model"));
        have_model = have_g = true;
    } else if (method == "g-ws" || method == "g-dtws") {
        g_params = load_model(cfg.get_string("g_model"));
        have_g = true;
    } else if (method != "raw-ws") {
        throw std::runtime_error("segment: method must be learned, g-ws, g-dtws or raw-ws");
    }
    const double smooth_sigma = cfg.get_double("smooth_sigma", method == "g-dtws" ? 0.0 : 1.0);
    const double threshold = cfg.get_double("threshold", 0.5);

    for (const auto& c : corpus) {
        Segmentation pred(c.gt.graph);
        if (method == "learned") {
            const Image augmented = augment(c.image, g_params);
            const StaticModelProvider sp(model);
            const DynamicModelProvider dp(model);
            const AltitudeProvider& provider =
                model.arch == ModelArch::Dynamic
                    ? static_cast<const AltitudeProvider&>(dp)
                    : static_cast<const AltitudeProvider&>(sp);
            pred = segmentation_of(grow(c.gt.graph, augmented, c.seeds, provider));
        } else {
            std::vector<double> node_map(c.gt.graph.num_nodes());
            if (method == "raw-ws") {
                for (NodeId n = 0; n < c.gt.graph.num_nodes(); ++n)
                    node_map[n] = c.image.at(n, 0);
            } else {
                for (NodeId n = 0; n < c.gt.graph.num_nodes(); ++n)
                    node_map[n] = predict_g(g_params, c.image, n);
            }
            std::vector<double> altitudes;
            if (method == "g-dtws") {
                Image m(c.gt.graph, 1, node_map);
                if (smooth_sigma > 0.0) m = smooth_image(m, smooth_sigma);
                altitudes = dtws_altitudes(c.gt.graph, m.data, threshold);
            } else {
                Image m(c.gt.graph, 1, node_map);
                m = smooth_image(m, smooth_sigma);
                altitudes = lift_node_map(c.gt.graph, m.data);
            }
            const StaticMapProvider provider(altitudes);
            pred = segmentation_of(grow(c.gt.graph, c.image, c.seeds, provider));
        }
        save_labels(out / (c.id + "_pred.lwa1"), pred);
        check_lwa1(out / (c.id + "_pred.lwa1"));
    }
    cfg.write_resolved(out / "resolved_segment.config");
    return 0;
}

// ----------------------------------------------------------------- evaluate

constexpr const char* kEvaluateKeys[] = {"corpus", "pred", "tolerance", "method",
                                         "sigma_noise"};

int cmd_evaluate(RunConfig cfg, const fs::path& out) {
    cfg.require_known(kEvaluateKeys);
    const fs::path corpus_dir = cfg.get_string("corpus");
    const fs::path pred_dir = cfg.get_string("pred");
    const double tolerance = cfg.get_double("tolerance", 2.0);
    const std::string method = cfg.get_string("method", "learned");
    const std::string sigma = cfg.get_string("sigma_noise", "0.3");

    const std::vector<CorpusItem> corpus = load_corpus(corpus_dir);
    fs::create_directories(out);

    std::vector<ScoreReport> reports;
    int height = 0, width = 0;
    for (const auto& c : corpus) {
        const fs::path pred_path = pred_dir / (c.id + "_pred.lwa1");
        if (!fs::exists(pred_path))
            throw std::runtime_error("evaluate: missing prediction " + pred_path.string());
        const Segmentation pred = load_labels(pred_path);
        reports.push_back(score(pred, c.gt, tolerance));
        height = c.gt.graph.height();
        width = c.gt.graph.width();
    }

    auto agg = [&](auto select) {
        double mean = 0.0;
        for (const auto& r : reports) mean += select(r);
        mean /= reports.size();
        double ss = 0.0;
        for (const auto& r : reports) ss += (select(r) - mean) * (select(r) - mean);
        const double sd = reports.size() > 1 ? std::sqrt(ss / (reports.size() - 1)) : 0.0;
        return std::pair<double, double>(mean, sd);
    };
    const auto [ar_m, ar_s] = agg([](const ScoreReport& r) { return r.arand; });
    const auto [vs_m, vs_s] = agg([](const ScoreReport& r) { return r.voi_split; });
    const auto [vm_m, vm_s] = agg([](const ScoreReport& r) { return r.voi_merge; });

    const fs::path csv_path = out / ("scores_" + method + "_" + sigma + ".csv");
    std::ofstream csv(csv_path, std::ios::trunc);
    csv << "# msfseg-scores method=" << method << " sigma_noise=" << sigma << " height="
        << height << " width=" << width << "\n";
    csv << "image_id,arand,voi_split,voi_merge,scored_nodes,tolerance\n";
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const ScoreReport& r = reports[i];
        csv << corpus[i].id << ',' << fmt(r.arand) << ',' << fmt(r.voi_split) << ','
            << fmt(r.voi_merge) << ',' << r.scored_nodes << ',' << fmt(tolerance) << '\n';
    }
    csv << "mean," << fmt(ar_m) << ',' << fmt(vs_m) << ',' << fmt(vm_m) << ",," << fmt(tolerance)
        << '\n';
    csv << "std," << fmt(ar_s) << ',' << fmt(vs_s) << ',' << fmt(vm_s) << ",," << fmt(tolerance)
        << '\n';
    csv << "summary," << fmt_pm(ar_m, ar_s) << ',' << fmt_pm(vs_m, vs_s) << ','
        << fmt_pm(vm_m, vm_s) << ",," << fmt(tolerance) << '\n';
    csv.close();
    cfg.write_resolved(out / ("resolved_evaluate_" + method + "_" + sigma + ".config"));
    std::cout << method << " sigma=" << sigma << " ARAND " << fmt_pm(ar_m, ar_s) << "\n";
    return 0;
}

// ------------------------------------------------------------------- report

constexpr const char* kReportKeys[] = {"scores_dir", "methods", "sigmas"};

struct ScoreSummary {
    double mean = 0.0, stddev = 0.0;
    int height = 0, width = 0;
    bool found = false;
};

ScoreSummary read_summary(const fs::path& path) {
    ScoreSummary s;
    std::ifstream is(path);
    if (!is) return s;
    std::string line;
    while (std::getline(is, line)) {
        if (line.rfind("# msfseg-scores", 0) == 0) {
            std::istringstream ss(line);
            std::string tok;
            while (ss >> tok) {
                if (tok.rfind("height=", 0) == 0) s.height = std::stoi(tok.substr(7));
                if (tok.rfind("width=", 0) == 0) s.width = std::stoi(tok.substr(6));
            }
        } else if (line.rfind("mean,", 0) == 0) {
            s.mean = std::stod(line.substr(5));
            s.found = true;
        } else if (line.rfind("std,", 0) == 0) {
            s.stddev = std::stod(line.substr(4));
        }
    }
    return s;
}

int cmd_report(RunConfig cfg, const fs::path& out) {
    cfg.require_known(kReportKeys);
    const fs::path scores_dir = cfg.get_string("scores_dir");
    const std::vector<std::string> methods = split_list(cfg.get_string("methods"));
    const std::vector<std::string> sigmas = split_list(cfg.get_string("sigmas"));
    if (methods.empty() || sigmas.empty())
        throw std::runtime_error("report: methods and sigmas must be non-empty");

    fs::create_directories(out);
    std::ofstream csv(out / "report.csv", std::ios::trunc);
    std::ofstream txt(out / "report.txt", std::ios::trunc);
    csv << "method,sigma_noise,arand_mean,arand_std\n";

    txt << "ARAND";
    for (const auto& s : sigmas) txt << "\tsigma=" << s;
    txt << "\n";

    int height = -1, width = -1;
    for (const auto& m : methods) {
        txt << m;
        for (const auto& s : sigmas) {
            const fs::path path = scores_dir / ("scores_" + m + "_" + s + ".csv");
            const ScoreSummary sum = read_summary(path);
            if (!sum.found)
                throw std::runtime_error("report: missing or malformed score csv: " +
                                         path.string());
            if (height < 0) {
                height = sum.height;
                width = sum.width;
            } else if (height != sum.height || width != sum.width) {
                throw std::runtime_error("report: conflicting graph shapes across score CSVs");
            }
            csv << m << ',' << s << ',' << fmt(sum.mean) << ',' << fmt(sum.stddev) << '\n';
            txt << '\t' << fmt_pm(sum.mean, sum.stddev);
        }
        txt << '\n';
    }
    cfg.write_resolved(out / "resolved_report.config");
    return 0;
}

void usage() {
    std::cerr << "usage: msf-seg <generate|pretrain-g|train|segment|evaluate|report> "
                 "--config FILE [--out DIR]\n";
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        usage();
        return 2;
    }
    const std::string cmd = argv[1];
    std::string config_path, out_dir = ".";
    for (int i = 2; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) config_path = argv[++i];
        else if (arg == "--out" && i + 1 < argc) out_dir = argv[++i];
        else {
            std::cerr << "msf-seg: unknown argument: " << arg << "\n";
            usage();
            return 2;
        }
    }
    if (config_path.empty()) {
        std::cerr << "msf-seg: --config is required\n";
        usage();
        return 2;
    }

    try {
        RunConfig cfg = RunConfig::from_file(config_path);
        if (cmd == "generate") return cmd_generate(std::move(cfg), out_dir);
        if (cmd == "pretrain-g") return cmd_pretrain_g(std::move(cfg), out_dir);
        if (cmd == "train") return cmd_train(std::move(cfg), out_dir);
        if (cmd == "segment") return cmd_segment(std::move(cfg), out_dir);
        if (cmd == "evaluate") return cmd_evaluate(std::move(cfg), out_dir);
        if (cmd == "report") return cmd_report(std::move(cfg), out_dir);
        std::cerr << "msf-seg: unknown subcommand: " << cmd << "\n";
        usage();
        return 2;
    } catch (const numeric_error& e) {
        std::cerr << "msf-seg: numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "msf-seg: " << e.what() << "\n";
        return 2;
    }
}
