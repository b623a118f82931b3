#include "hsk/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include "hsk/error.hpp"

namespace hsk {

namespace {

std::size_t count_unique(const std::vector<std::uint32_t>& map) {
    std::set<std::uint32_t> ids(map.begin(), map.end());
    return ids.size();
}

// Parent map from co-location; throws on the first pixel whose fine region
// spans two coarse regions.
std::unordered_map<std::uint32_t, std::uint32_t> infer_parents(
    const std::vector<std::uint32_t>& fine, const std::vector<std::uint32_t>& coarse,
    std::size_t cols, std::size_t level_index) {
    std::unordered_map<std::uint32_t, std::uint32_t> parents;
    for (std::size_t pix = 0; pix < fine.size(); ++pix) {
        const auto [it, inserted] = parents.emplace(fine[pix], coarse[pix]);
        if (!inserted && it->second != coarse[pix])
            throw Error("nesting violation at pixel (" + std::to_string(pix / cols) + ", " +
                        std::to_string(pix % cols) + ") between levels " +
                        std::to_string(level_index + 1) + " and " +
                        std::to_string(level_index + 2));
    }
    return parents;
}

void check_alphas(const std::vector<double>& alphas) {
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        if (!(alphas[i] > 0.0) || !std::isfinite(alphas[i]))
            throw Error("alphas must be positive and finite");
        if (i > 0 && !(alphas[i] > alphas[i - 1]))
            throw Error("alphas not strictly increasing");
    }
}

struct MergeCandidate {
    double dissimilarity;
    std::uint32_t a, b;          // a < b
    std::uint32_t version_a, version_b;

    bool operator>(const MergeCandidate& other) const {
        if (dissimilarity != other.dissimilarity) return dissimilarity > other.dissimilarity;
        if (a != other.a) return a > other.a;
        return b > other.b;
    }
};

} // namespace

void Hierarchy::validate() const {
    if (levels.empty()) throw Error("hierarchy has no levels");
    check_alphas(alphas);
    if (alphas.size() != levels.size() - 1)
        throw Error("hierarchy has " + std::to_string(levels.size()) + " levels but " +
                    std::to_string(alphas.size()) + " alphas");
    if (region_counts.size() != levels.size())
        throw Error("hierarchy region_counts size mismatch");
    if (parent_links.size() + 1 != levels.size())
        throw Error("hierarchy parent_links size mismatch");
    for (std::size_t l = 0; l < levels.size(); ++l) {
        if (levels[l].size() != rows * cols) throw Error("level map size mismatch");
        if (region_counts[l] != count_unique(levels[l]))
            throw Error("stored region count disagrees with level map");
        if (l + 1 < levels.size()) {
            if (region_counts[l + 1] > region_counts[l])
                throw Error("region counts increase between levels " + std::to_string(l + 1) +
                            " and " + std::to_string(l + 2));
            const auto parents = infer_parents(levels[l], levels[l + 1], cols, l);
            if (parents != parent_links[l])
                throw Error("parent links inconsistent with level maps at level " +
                            std::to_string(l + 1));
        }
    }
}

LevelStats compute_region_stats(const Hierarchy& hierarchy, const HyperCube& cube) {
    if (cube.rows != hierarchy.rows || cube.cols != hierarchy.cols)
        throw Error("cube and hierarchy dimensions differ");
    const std::size_t bands = cube.bands;
    LevelStats stats(hierarchy.level_count());
    for (std::size_t l = 0; l < hierarchy.level_count(); ++l) {
        auto& level = stats[l];
        const auto& map = hierarchy.levels[l];
        for (std::size_t pix = 0; pix < map.size(); ++pix) {
            auto& rs = level[map[pix]];
            if (rs.mean_spectrum.empty()) rs.mean_spectrum.assign(bands, 0.0);
            rs.pixel_count += 1;
            const double* v = cube.values.data() + pix * bands;
            for (std::size_t b = 0; b < bands; ++b) rs.mean_spectrum[b] += v[b];
        }
        for (auto& [id, rs] : level)
            for (std::size_t b = 0; b < bands; ++b)
                rs.mean_spectrum[b] /= static_cast<double>(rs.pixel_count);
    }
    return stats;
}

Hierarchy segment(const HyperCube& cube, const std::vector<double>& alphas) {
    cube.validate();
    check_alphas(alphas);
    const std::size_t rows = cube.rows, cols = cube.cols, bands = cube.bands;
    const std::size_t n = rows * cols;

    // Standardize per band over the whole image for the dissimilarity
    // measure; degenerate bands are centered only.
    std::vector<double> z(cube.values.size());
    for (std::size_t b = 0; b < bands; ++b) {
        double mean = 0.0;
        for (std::size_t pix = 0; pix < n; ++pix) mean += cube.values[pix * bands + b];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t pix = 0; pix < n; ++pix) {
            const double d = cube.values[pix * bands + b] - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / static_cast<double>(n));
        const double scale = sd < 1e-12 ? 1.0 : sd;
        for (std::size_t pix = 0; pix < n; ++pix)
            z[pix * bands + b] = (cube.values[pix * bands + b] - mean) / scale;
    }

    // Region state, indexed by region id (smallest member pixel index).
    std::vector<double> mean(z);                 // current region means
    std::vector<std::size_t> size(n, 1);
    std::vector<std::uint32_t> version(n, 0);
    std::vector<bool> alive(n, true);
    std::vector<std::set<std::uint32_t>> adjacency(n);
    std::size_t alive_count = n;

    // Union-find over pixels; the root is always the smallest id in the
    // region, so find() directly yields the region id.
    std::vector<std::uint32_t> up(n);
    for (std::size_t i = 0; i < n; ++i) up[i] = static_cast<std::uint32_t>(i);
    const auto find = [&](std::uint32_t x) {
        while (up[x] != x) {
            up[x] = up[up[x]];
            x = up[x];
        }
        return x;
    };

    const auto dissimilarity = [&](std::uint32_t a, std::uint32_t b) {
        double d2 = 0.0;
        for (std::size_t k = 0; k < bands; ++k) {
            const double d = mean[a * bands + k] - mean[b * bands + k];
            d2 += d * d;
        }
        const double sa = static_cast<double>(size[a]), sb = static_cast<double>(size[b]);
        return sa * sb / (sa + sb) * d2;
    };

    std::priority_queue<MergeCandidate, std::vector<MergeCandidate>,
                        std::greater<MergeCandidate>>
        heap;
    const auto push_candidate = [&](std::uint32_t a, std::uint32_t b) {
        if (a > b) std::swap(a, b);
        heap.push({dissimilarity(a, b), a, b, version[a], version[b]});
    };

    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            const std::uint32_t id = static_cast<std::uint32_t>(r * cols + c);
            if (c + 1 < cols) {
                adjacency[id].insert(id + 1);
                adjacency[id + 1].insert(id);
                push_candidate(id, id + 1);
            }
            if (r + 1 < rows) {
                const std::uint32_t down = id + static_cast<std::uint32_t>(cols);
                adjacency[id].insert(down);
                adjacency[down].insert(id);
                push_candidate(id, down);
            }
        }

    Hierarchy h;
    h.rows = rows;
    h.cols = cols;
    const auto snapshot = [&]() {
        std::vector<std::uint32_t> map(n);
        for (std::size_t pix = 0; pix < n; ++pix)
            map[pix] = find(static_cast<std::uint32_t>(pix));
        h.levels.push_back(std::move(map));
        h.region_counts.push_back(alive_count);
    };
    snapshot(); // level 1: pixel partition

    for (const double alpha : alphas) {
        while (!heap.empty()) {
            const MergeCandidate top = heap.top();
            if (!alive[top.a] || !alive[top.b] || version[top.a] != top.version_a ||
                version[top.b] != top.version_b) {
                heap.pop();
                continue;
            }
            if (top.dissimilarity > alpha) break;
            heap.pop();

            const std::uint32_t a = top.a, b = top.b;
            const double sa = static_cast<double>(size[a]), sb = static_cast<double>(size[b]);
            for (std::size_t k = 0; k < bands; ++k)
                mean[a * bands + k] =
                    (sa * mean[a * bands + k] + sb * mean[b * bands + k]) / (sa + sb);
            size[a] += size[b];
            alive[b] = false;
            ++version[a];
            up[b] = a;
            --alive_count;

            std::set<std::uint32_t> neighbors;
            neighbors.insert(adjacency[a].begin(), adjacency[a].end());
            neighbors.insert(adjacency[b].begin(), adjacency[b].end());
            neighbors.erase(a);
            neighbors.erase(b);
            adjacency[a] = neighbors;
            adjacency[b].clear();
            for (const std::uint32_t nb : neighbors) {
                adjacency[nb].erase(b);
                adjacency[nb].insert(a);
                push_candidate(a, nb);
            }
        }
        snapshot();
    }

    h.alphas = alphas;
    for (std::size_t l = 0; l + 1 < h.levels.size(); ++l)
        h.parent_links.push_back(infer_parents(h.levels[l], h.levels[l + 1], cols, l));
    return h;
}

Hierarchy import_hierarchy(const std::vector<LevelMap>& maps, std::vector<double> alphas) {
    if (maps.empty()) throw Error("import requires at least one label map");
    Hierarchy h;
    h.rows = maps[0].rows;
    h.cols = maps[0].cols;
    for (const auto& m : maps) {
        if (m.rows != h.rows || m.cols != h.cols)
            throw Error("imported level maps have mismatched dimensions");
        if (m.regions.size() != m.rows * m.cols) throw Error("level map payload size mismatch");
        h.levels.push_back(m.regions);
        h.region_counts.push_back(count_unique(m.regions));
    }
    for (std::size_t l = 0; l + 1 < h.levels.size(); ++l)
        h.parent_links.push_back(infer_parents(h.levels[l], h.levels[l + 1], h.cols, l));
    if (alphas.empty())
        for (std::size_t l = 1; l < h.levels.size(); ++l)
            alphas.push_back(static_cast<double>(l));
    if (alphas.size() != h.levels.size() - 1)
        throw Error("expected " + std::to_string(h.levels.size() - 1) + " alphas, got " +
                    std::to_string(alphas.size()));
    check_alphas(alphas);
    h.alphas = std::move(alphas);
    return h;
}

Hierarchy import_hierarchy(const std::vector<std::filesystem::path>& map_paths) {
    std::vector<LevelMap> maps;
    maps.reserve(map_paths.size());
    for (const auto& p : map_paths) maps.push_back(read_level_map(p));
    return import_hierarchy(maps);
}

std::size_t retained_level_count(const Hierarchy& hierarchy,
                                 std::size_t top_levels_discarded) {
    if (top_levels_discarded >= hierarchy.level_count())
        throw Error("top_levels_discarded must be smaller than the level count");
    std::size_t keep = hierarchy.level_count();
    while (keep > 1 && hierarchy.region_counts[keep - 1] <= 1) --keep;
    if (top_levels_discarded >= keep)
        throw Error("discarding " + std::to_string(top_levels_discarded) +
                    " levels leaves no usable level");
    return keep - top_levels_discarded;
}

namespace {

FeatureSequence sequence_from_stats(const Hierarchy& hierarchy, const LevelStats& stats,
                                    std::size_t bands, std::size_t pix, std::size_t p_max) {
    FeatureSequence seq;
    seq.dim = bands;
    seq.values.reserve(p_max * bands);
    for (std::size_t l = 0; l < p_max; ++l) {
        const auto& rs = stats[l].at(hierarchy.levels[l][pix]);
        seq.values.insert(seq.values.end(), rs.mean_spectrum.begin(), rs.mean_spectrum.end());
    }
    return seq;
}

} // namespace

FeatureSequence extract_sequence(const Hierarchy& hierarchy, const HyperCube& cube,
                                 std::size_t row, std::size_t col,
                                 std::size_t top_levels_discarded) {
    if (row >= hierarchy.rows || col >= hierarchy.cols)
        throw Error("pixel (" + std::to_string(row) + ", " + std::to_string(col) +
                    ") is out of bounds");
    const std::size_t p_max = retained_level_count(hierarchy, top_levels_discarded);
    const LevelStats stats = compute_region_stats(hierarchy, cube);
    return sequence_from_stats(hierarchy, stats, cube.bands, row * hierarchy.cols + col, p_max);
}

SequenceSet extract_labeled_sequences(const Hierarchy& hierarchy, const HyperCube& cube,
                                      const LabelRaster& labels,
                                      std::size_t top_levels_discarded) {
    if (labels.rows != hierarchy.rows || labels.cols != hierarchy.cols)
        throw Error("label raster and hierarchy dimensions differ");
    const std::size_t p_max = retained_level_count(hierarchy, top_levels_discarded);
    const LevelStats stats = compute_region_stats(hierarchy, cube);
    SequenceSet set;
    set.dim = cube.bands;
    for (std::size_t r = 0; r < labels.rows; ++r)
        for (std::size_t c = 0; c < labels.cols; ++c) {
            const std::uint16_t label = labels.at(r, c);
            if (label == 0) continue;
            set.sequences.push_back(sequence_from_stats(hierarchy, stats, cube.bands,
                                                        r * hierarchy.cols + c, p_max));
            set.ids.push_back("r" + std::to_string(r) + "c" + std::to_string(c));
            set.labels.push_back(label);
        }
    set.validate();
    return set;
}

void FeatureScaler::apply(FeatureSequence& sequence) const {
    if (sequence.dim != mean.size())
        throw Error("scaler dimension mismatch");
    for (std::size_t p = 0; p < sequence.length(); ++p)
        for (std::size_t d = 0; d < sequence.dim; ++d) {
            double& v = sequence.values[p * sequence.dim + d];
            v = (v - mean[d]) / scale[d];
        }
}

void FeatureScaler::apply(SequenceSet& set) const {
    for (auto& s : set.sequences) apply(s);
}

FeatureScaler fit_feature_scaler(const SequenceSet& set) {
    if (set.size() == 0) throw Error("cannot fit a scaler on an empty set");
    const std::size_t dim = set.dim;
    std::size_t total = 0;
    std::vector<double> mean(dim, 0.0);
    for (const auto& s : set.sequences) {
        total += s.length();
        for (std::size_t p = 0; p < s.length(); ++p)
            for (std::size_t d = 0; d < dim; ++d) mean[d] += s.values[p * dim + d];
    }
    if (total < 2) throw Error("scaler requires at least 2 vectors");
    for (double& m : mean) m /= static_cast<double>(total);
    std::vector<double> var(dim, 0.0);
    for (const auto& s : set.sequences)
        for (std::size_t p = 0; p < s.length(); ++p)
            for (std::size_t d = 0; d < dim; ++d) {
                const double diff = s.values[p * dim + d] - mean[d];
                var[d] += diff * diff;
            }
    FeatureScaler scaler;
    scaler.mean = std::move(mean);
    scaler.scale.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        const double sd = std::sqrt(var[d] / static_cast<double>(total));
        scaler.scale[d] = sd < 1e-12 ? 1.0 : sd;
    }
    return scaler;
}

FeatureScaler standardize_features(SequenceSet& set) {
    FeatureScaler scaler = fit_feature_scaler(set);
    scaler.apply(set);
    return scaler;
}

void save_hierarchy(const Hierarchy& hierarchy, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> names;
    for (std::size_t l = 0; l < hierarchy.level_count(); ++l) {
        char name[32];
        std::snprintf(name, sizeof name, "level_%03zu.hsh", l);
        names.emplace_back(name);
        LevelMap map{hierarchy.rows, hierarchy.cols, hierarchy.levels[l]};
        write_level_map(map, dir / names.back());
    }
    atomic_write(dir / "hierarchy.txt", [&](std::ostream& os) {
        os << "HSHM 1\n";
        os << "rows " << hierarchy.rows << "\n";
        os << "cols " << hierarchy.cols << "\n";
        os << "levels " << hierarchy.level_count() << "\n";
        for (std::size_t l = 0; l < hierarchy.level_count(); ++l) {
            os << "level " << names[l];
            if (l > 0) {
                char buf[40];
                std::snprintf(buf, sizeof buf, "%.17g", hierarchy.alphas[l - 1]);
                os << " " << buf;
            }
            os << "\n";
        }
    });
}

Hierarchy load_hierarchy(const std::filesystem::path& dir) {
    const std::filesystem::path manifest = dir / "hierarchy.txt";
    std::ifstream in(manifest);
    if (!in) throw IoError("cannot open file '" + manifest.string() + "'");
    std::string header;
    std::getline(in, header);
    if (header != "HSHM 1")
        throw IoError("'" + manifest.string() + "': malformed header, expected 'HSHM 1'");
    std::vector<LevelMap> maps;
    std::vector<double> alphas;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "rows" || key == "cols" || key == "levels") continue;
        if (key != "level")
            throw IoError("'" + manifest.string() + "': unknown manifest entry '" + key + "'");
        std::string name;
        ls >> name;
        if (name.empty()) throw IoError("'" + manifest.string() + "': missing level file name");
        maps.push_back(read_level_map(dir / name));
        double alpha;
        if (ls >> alpha) alphas.push_back(alpha);
    }
    return import_hierarchy(maps, std::move(alphas));
}

} // namespace hsk
