#include "hsk/cli.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "hsk/error.hpp"
#include "hsk/eval.hpp"
#include "hsk/hierarchy.hpp"
#include "hsk/io.hpp"
#include "hsk/kernel.hpp"
#include "hsk/parallel.hpp"
#include "hsk/svm.hpp"
#include "hsk/synth.hpp"
#include "hsk/types.hpp"

namespace hsk::cli {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_commas(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::uint16_t label_of(const SequenceSet& set, const std::string& id) {
    for (std::size_t i = 0; i < set.size(); ++i)
        if (set.ids[i] == id) return set.labels[i];
    throw Error("sample '" + id + "' not found in the sequence file");
}

void warn_if_q_too_large(const Weighting& w, const SequenceSet& set) {
    if (w.kind != Weighting::Kind::QSpectrum) return;
    std::size_t min_len = set.sequences.front().length();
    for (const auto& s : set.sequences) min_len = std::min(min_len, s.length());
    if (w.q > min_len)
        std::cerr << "warning: weighting q=" << w.q << " exceeds the shortest sequence length "
                  << min_len << "; affected kernel values will be 0\n";
}

void cmd_synth(const std::string& out_cube, const std::string& out_labels, std::size_t rows,
               std::size_t cols, std::size_t bands, std::size_t classes, double noise,
               std::uint64_t seed) {
    const SynthScene scene = synth_scene(rows, cols, bands, classes, noise, seed);
    write_cube(scene.cube, out_cube);
    write_labels(scene.labels, out_labels);
    std::cout << "wrote " << out_cube << " (" << rows << "x" << cols << "x" << bands
              << ") and " << out_labels << " (" << classes << " classes)\n";
}

void cmd_segment(const std::string& cube_path, const std::string& alphas_text,
                 const std::string& out_dir) {
    const HyperCube cube = read_cube(cube_path);
    const std::vector<double> alphas = parse_grid_list(alphas_text);
    const Hierarchy h = segment(cube, alphas);
    save_hierarchy(h, out_dir);
    for (std::size_t l = 0; l < h.level_count(); ++l)
        std::cout << "level " << (l + 1) << ": " << h.region_counts[l] << " regions\n";
}

void cmd_import(const std::vector<std::string>& map_paths, const std::string& out_dir) {
    std::vector<std::filesystem::path> paths(map_paths.begin(), map_paths.end());
    const Hierarchy h = import_hierarchy(paths);
    save_hierarchy(h, out_dir);
    std::cout << "imported " << h.level_count() << " levels\n";
}

void cmd_sequences(const std::string& cube_path, const std::string& hierarchy_dir,
                   const std::string& labels_path, std::size_t top_discard,
                   const std::string& out_path) {
    const HyperCube cube = read_cube(cube_path);
    const Hierarchy h = load_hierarchy(hierarchy_dir);
    const LabelRaster labels = read_labels(labels_path);
    if (labels.rows != cube.rows || labels.cols != cube.cols)
        throw Error("label raster dimensions do not match the cube");
    const SequenceSet set = extract_labeled_sequences(h, cube, labels, top_discard);
    write_sequences(set, out_path);
    std::cout << "wrote " << set.size() << " sequences of length "
              << set.sequences.front().length() << "\n";
}

void cmd_gram(const std::string& seq_path, const std::string& vs_path, double gamma,
              const std::string& weighting_text, bool no_normalize, unsigned threads,
              const std::string& out_path) {
    const KernelConfig config{gamma, Weighting::parse(weighting_text), !no_normalize};
    config.validate();
    const SequenceSet rows = read_sequences(seq_path);
    warn_if_q_too_large(config.weighting, rows);
    GramMatrix g;
    if (vs_path.empty()) {
        g = gram_self(rows, config, threads);
    } else {
        const SequenceSet cols = read_sequences(vs_path);
        warn_if_q_too_large(config.weighting, cols);
        g = gram_cross(rows, cols, config, threads);
    }
    write_gram(g, out_path);
    std::cout << "wrote " << g.rows << "x" << g.cols << " gram matrix\n";
}

void cmd_train(const std::string& gram_path, const std::string& seq_path, double C,
               double tol, const std::string& out_path) {
    const GramMatrix gram = read_gram(gram_path);
    if (!gram.self()) throw Error("training requires a square self gram matrix");
    const SequenceSet set = read_sequences(seq_path);
    std::vector<int> labels;
    labels.reserve(gram.rows);
    for (const auto& id : gram.row_ids) {
        const std::uint16_t l = label_of(set, id);
        if (l == 0) throw Error("training sample '" + id + "' is unlabeled");
        labels.push_back(l);
    }
    const SvmModel model = train_one_vs_one(gram, labels, C, tol);
    save_model(model, out_path);
    std::cout << "trained " << model.machines.size() << " binary machines over "
              << model.classes.size() << " classes\n";
}

void cmd_predict(const std::string& model_path, const std::string& gram_path,
                 const std::string& out_path) {
    const SvmModel model = load_model(model_path);
    const GramMatrix gram = read_gram(gram_path);
    const std::vector<int> predicted = predict(model, gram);
    atomic_write(out_path, [&](std::ostream& os) {
        os << "sample_id,predicted_class\n";
        for (std::size_t i = 0; i < predicted.size(); ++i)
            os << gram.row_ids[i] << "," << predicted[i] << "\n";
    });
    std::cout << "wrote " << predicted.size() << " predictions\n";
}

std::vector<Weighting> parse_weighting_list(const std::string& text) {
    std::vector<Weighting> out;
    for (const auto& item : split_commas(text)) out.push_back(Weighting::parse(item));
    if (out.empty()) throw Error("empty weighting list");
    return out;
}

void cmd_cv(const std::string& seq_path, const std::string& gammas_text,
            const std::string& cs_text, const std::string& weightings_text, std::size_t folds,
            std::uint64_t seed, double tol, unsigned threads, const std::string& out_path) {
    const SequenceSet set = read_sequences(seq_path);
    for (std::uint16_t l : set.labels)
        if (l == 0) throw Error("cross-validation requires fully labeled sequences");
    CvGrid grid;
    grid.gammas = parse_grid_list(gammas_text);
    grid.Cs = parse_grid_list(cs_text);
    grid.weightings = parse_weighting_list(weightings_text);
    const CvChoice choice = cross_validate(set, grid, folds, seed, tol, threads);
    std::cout << "gamma=" << fmt(choice.gamma) << " C=" << fmt(choice.C)
              << " weighting=" << choice.weighting.to_string()
              << " mean_accuracy=" << fmt(choice.mean_accuracy) << "\n";
    if (!out_path.empty())
        atomic_write(out_path, [&](std::ostream& os) {
            os << "gamma,C,weighting,mean_accuracy\n";
            os << fmt(choice.gamma) << "," << fmt(choice.C) << ","
               << choice.weighting.to_string() << "," << fmt(choice.mean_accuracy) << "\n";
        });
}

void cmd_evaluate(const std::string& cube_path, const std::string& hierarchy_dir,
                  const std::string& labels_path, const std::string& methods_text,
                  std::size_t n_per_class, std::size_t repetitions, std::uint64_t seed,
                  const std::string& gammas_text, const std::string& cs_text,
                  const std::string& lambdas_text, const std::string& qs_text,
                  std::size_t folds, std::size_t top_discard, double tol, unsigned threads,
                  const std::string& out_path, const std::string& summary_path) {
    const HyperCube cube = read_cube(cube_path);
    const Hierarchy hierarchy = load_hierarchy(hierarchy_dir);
    const LabelRaster labels = read_labels(labels_path);
    const SequenceSet labeled = extract_labeled_sequences(hierarchy, cube, labels, top_discard);

    ExperimentGrid grid = ExperimentGrid::defaults();
    if (!gammas_text.empty()) grid.gammas = parse_grid_list(gammas_text);
    if (!cs_text.empty()) grid.Cs = parse_grid_list(cs_text);
    if (!lambdas_text.empty()) grid.lambdas = parse_grid_list(lambdas_text);
    if (!qs_text.empty())
        for (double q : parse_grid_list(qs_text))
            grid.qs.push_back(static_cast<std::size_t>(q));

    std::vector<Method> methods;
    for (const auto& name : split_commas(methods_text)) methods.push_back(parse_method(name));
    if (methods.empty()) throw Error("no methods requested");

    const SplitSpec spec{n_per_class, seed, true};
    std::vector<ExperimentResult> results;
    for (const Method method : methods) {
        results.push_back(
            run_experiment(labeled, spec, repetitions, grid, method, folds, tol, threads));
        const auto& r = results.back();
        std::cout << method_name(method) << ": OA " << fmt(100.0 * r.oa.mean) << " ("
                  << fmt(100.0 * r.oa.stddev) << ")\n";
    }

    atomic_write(out_path, [&](std::ostream& os) {
        os << "method,n,repetition,oa,aa,kappa,gamma,C,weighting\n";
        for (const auto& r : results)
            for (std::size_t rep = 0; rep < r.repetitions.size(); ++rep) {
                const auto& rr = r.repetitions[rep];
                os << method_name(r.method) << "," << n_per_class << "," << rep << ","
                   << fmt(rr.metrics.oa) << "," << fmt(rr.metrics.aa) << ","
                   << fmt(rr.metrics.kappa) << "," << fmt(rr.choice.gamma) << ","
                   << fmt(rr.choice.C) << "," << rr.choice.weighting.to_string() << "\n";
            }
    });
    if (!summary_path.empty())
        atomic_write(summary_path, [&](std::ostream& os) {
            os << "method,n,repetitions,oa_mean,oa_std,aa_mean,aa_std,kappa_mean,kappa_std\n";
            for (const auto& r : results)
                os << method_name(r.method) << "," << n_per_class << ","
                   << r.repetitions.size() << "," << fmt(r.oa.mean) << "," << fmt(r.oa.stddev)
                   << "," << fmt(r.aa.mean) << "," << fmt(r.aa.stddev) << ","
                   << fmt(r.kappa.mean) << "," << fmt(r.kappa.stddev) << "\n";
        });
}

} // namespace

double parse_grid_value(const std::string& text) {
    std::size_t pos = 0;
    double v;
    if (text.rfind("2^", 0) == 0) {
        const double e = std::stod(text.substr(2), &pos);
        if (pos != text.size() - 2) throw Error("cannot parse value '" + text + "'");
        v = std::pow(2.0, e);
    } else {
        v = std::stod(text, &pos);
        if (pos != text.size()) throw Error("cannot parse value '" + text + "'");
    }
    if (!std::isfinite(v)) throw Error("value '" + text + "' is not finite");
    return v;
}

std::vector<double> parse_grid_list(const std::string& text) {
    std::vector<double> out;
    for (const auto& item : split_commas(text)) {
        const auto dots = item.find("..");
        if (dots == std::string::npos) {
            out.push_back(parse_grid_value(item));
            continue;
        }
        const double lo = parse_grid_value(item.substr(0, dots));
        const double hi = parse_grid_value(item.substr(dots + 2));
        if (!(lo > 0.0) || hi < lo)
            throw Error("range '" + item + "' must satisfy 0 < lo <= hi");
        for (double v = lo; v <= hi * (1.0 + 1e-12); v *= 2.0) out.push_back(v);
    }
    if (out.empty()) throw Error("empty value list");
    return out;
}

int run(std::vector<std::string> args) {
    CLI::App app{"hyperspectral classification with hierarchical sequence kernels"};
    app.require_subcommand(1);

    try {
        // synth
        auto* synth = app.add_subcommand("synth", "generate a synthetic labeled scene");
        std::size_t sy_rows = 32, sy_cols = 32, sy_bands = 8, sy_classes = 3;
        double sy_noise = 0.5;
        std::uint64_t sy_seed = 42;
        std::string sy_cube, sy_labels;
        synth->add_option("--rows", sy_rows);
        synth->add_option("--cols", sy_cols);
        synth->add_option("--bands", sy_bands);
        synth->add_option("--classes", sy_classes);
        synth->add_option("--noise", sy_noise, "gaussian noise standard deviation");
        synth->add_option("--seed", sy_seed);
        synth->add_option("--out-cube", sy_cube)->required();
        synth->add_option("--out-labels", sy_labels)->required();
        synth->callback([&] {
            cmd_synth(sy_cube, sy_labels, sy_rows, sy_cols, sy_bands, sy_classes, sy_noise,
                      sy_seed);
        });

        // segment
        auto* seg = app.add_subcommand("segment", "build a region hierarchy from a cube");
        std::string sg_cube, sg_out;
        std::string sg_alphas = "2^-2..2^8";
        seg->add_option("--cube", sg_cube)->required();
        seg->add_option("--alphas", sg_alphas, "thresholds, e.g. 2^-2..2^8 or 0.5,1,4");
        seg->add_option("--out", sg_out)->required();
        seg->callback([&] { cmd_segment(sg_cube, sg_alphas, sg_out); });

        // import
        auto* imp = app.add_subcommand("import", "import external label maps as a hierarchy");
        std::vector<std::string> im_maps;
        std::string im_out;
        imp->add_option("--maps", im_maps, "level map files, finest first")->required();
        imp->add_option("--out", im_out)->required();
        imp->callback([&] { cmd_import(im_maps, im_out); });

        // sequences
        auto* seq = app.add_subcommand("sequences", "extract ancestor feature sequences");
        std::string sq_cube, sq_hier, sq_labels, sq_out;
        std::size_t sq_discard = 0;
        seq->add_option("--cube", sq_cube)->required();
        seq->add_option("--hierarchy", sq_hier, "directory written by segment/import")->required();
        seq->add_option("--labels", sq_labels)->required();
        seq->add_option("--top-discard", sq_discard, "extra top levels to drop");
        seq->add_option("--out", sq_out)->required();
        seq->callback(
            [&] { cmd_sequences(sq_cube, sq_hier, sq_labels, sq_discard, sq_out); });

        // gram
        auto* gr = app.add_subcommand("gram", "compute a kernel matrix");
        std::string g_seq, g_vs, g_weighting = "const", g_out;
        double g_gamma = 1.0;
        bool g_nonorm = false;
        unsigned g_threads = 0;
        gr->add_option("--sequences", g_seq, "row sample sequences")->required();
        gr->add_option("--vs", g_vs, "column sample sequences (rectangular matrix)");
        gr->add_option("--gamma", g_gamma)->required();
        gr->add_option("--weighting", g_weighting, "q=<k> | const | decay=<lambda>");
        gr->add_flag("--no-normalize", g_nonorm);
        gr->add_option("--threads", g_threads);
        gr->add_option("--out", g_out)->required();
        gr->callback(
            [&] { cmd_gram(g_seq, g_vs, g_gamma, g_weighting, g_nonorm, g_threads, g_out); });

        // train
        auto* tr = app.add_subcommand("train", "train a one-against-one SVM");
        std::string t_gram, t_seq, t_out;
        double t_C = 1.0, t_tol = 1e-3;
        tr->add_option("--gram", t_gram)->required();
        tr->add_option("--labels-from-sequences", t_seq)->required();
        tr->add_option("--C", t_C)->required();
        tr->add_option("--tol", t_tol);
        tr->add_option("--out", t_out)->required();
        tr->callback([&] { cmd_train(t_gram, t_seq, t_C, t_tol, t_out); });

        // predict
        auto* pr = app.add_subcommand("predict", "predict classes from a kernel matrix");
        std::string p_model, p_gram, p_out;
        pr->add_option("--model", p_model)->required();
        pr->add_option("--gram", p_gram, "test-by-train kernel matrix")->required();
        pr->add_option("--out", p_out)->required();
        pr->callback([&] { cmd_predict(p_model, p_gram, p_out); });

        // cv
        auto* cv = app.add_subcommand("cv", "grid search by cross-validation");
        std::string c_seq, c_gammas = "2^-6..2^4", c_cs = "2^-2..2^10", c_weightings = "const";
        std::string c_out;
        std::size_t c_folds = 5;
        std::uint64_t c_seed = 42;
        double c_tol = 1e-3;
        unsigned c_threads = 0;
        cv->add_option("--sequences", c_seq)->required();
        cv->add_option("--gammas", c_gammas);
        cv->add_option("--Cs", c_cs);
        cv->add_option("--weightings", c_weightings, "comma list, e.g. q=1,q=2,const");
        cv->add_option("--folds", c_folds);
        cv->add_option("--seed", c_seed);
        cv->add_option("--tol", c_tol);
        cv->add_option("--threads", c_threads);
        cv->add_option("--out", c_out);
        cv->callback([&] {
            cmd_cv(c_seq, c_gammas, c_cs, c_weightings, c_folds, c_seed, c_tol, c_threads,
                   c_out);
        });

        // evaluate
        auto* ev = app.add_subcommand("evaluate", "run the sampling/CV/test protocol");
        std::string e_cube, e_hier, e_labels, e_out, e_summary;
        std::string e_methods = "pixel-only,stacked,spectrum-c,spectrum-q,spectrum-lambda";
        std::string e_gammas, e_cs, e_lambdas, e_qs;
        std::size_t e_n = 10, e_reps = 10, e_folds = 5, e_discard = 0;
        std::uint64_t e_seed = 42;
        double e_tol = 1e-3;
        unsigned e_threads = 0;
        ev->add_option("--cube", e_cube)->required();
        ev->add_option("--hierarchy", e_hier)->required();
        ev->add_option("--labels", e_labels)->required();
        ev->add_option("--methods", e_methods);
        ev->add_option("--n", e_n, "training samples per class");
        ev->add_option("--repetitions", e_reps);
        ev->add_option("--seed", e_seed);
        ev->add_option("--gammas", e_gammas);
        ev->add_option("--Cs", e_cs);
        ev->add_option("--lambdas", e_lambdas);
        ev->add_option("--qs", e_qs);
        ev->add_option("--folds", e_folds);
        ev->add_option("--top-discard", e_discard);
        ev->add_option("--tol", e_tol);
        ev->add_option("--threads", e_threads);
        ev->add_option("--out", e_out)->required();
        ev->add_option("--summary", e_summary);
        ev->callback([&] {
            cmd_evaluate(e_cube, e_hier, e_labels, e_methods, e_n, e_reps, e_seed, e_gammas,
                         e_cs, e_lambdas, e_qs, e_folds, e_discard, e_tol, e_threads, e_out,
                         e_summary);
        });

        std::vector<const char*> argv;
        argv.push_back("hsk");
        for (const auto& a : args) argv.push_back(a.c_str());
        try {
            app.parse(static_cast<int>(argv.size()), argv.data());
        } catch (const CLI::ParseError& e) {
            return app.exit(e);
        }
    } catch (const IoError& e) {
        std::cerr << "error 2: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error 1: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error 1: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace hsk::cli
