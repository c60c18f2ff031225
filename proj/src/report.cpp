#include <filesystem>

#include "steerlab/bench/bench.hpp"
#include "steerlab/util/common.hpp"
#include "steerlab/util/svg.hpp"

namespace steerlab::bench {

namespace {

std::string tables_csv(const Report& report) {
    std::string out = "system,task_set,accuracy,correct,total,steered_fraction\n";
    for (const auto& r : report.results) {
        std::size_t correct = 0;
        for (const auto& [id, ok] : r.per_task) {
            correct += ok ? 1 : 0;
        }
        out += r.system + "," + report.task_set + "," + format_double(r.accuracy, 6) + "," +
               std::to_string(correct) + "," + std::to_string(r.per_task.size()) + ",";
        out += r.stats ? format_double(r.stats->per_problem_mean_fraction, 6) : "";
        out += "\n";
    }
    return out;
}

std::string firing_histogram_svg(const Report& report) {
    // Category firing counts from the first hybrid result carrying stats.
    std::vector<std::string> labels;
    std::vector<std::size_t> counts;
    for (const auto& r : report.results) {
        if (r.stats && r.system == "hybrid") {
            for (const auto& [cat, n] : r.stats->merged.category_firings) {
                labels.push_back("cat " + std::to_string(cat));
                counts.push_back(n);
            }
            break;
        }
    }
    return svg_bar_chart("steered tokens per category", labels, counts);
}

}  // namespace

std::vector<std::string> emit_report(const Report& report, const std::string& dir) {
    std::filesystem::create_directories(dir);
    Report annotated = report;
    annotated.files = {"report.json", "tables.csv", "heatmap.svg", "firing_histogram.svg"};

    write_file(dir + "/tables.csv", tables_csv(annotated));
    if (annotated.grid) {
        write_file(dir + "/heatmap.svg", taxonomy::grid_heatmap_svg(*annotated.grid));
    } else {
        write_file(dir + "/heatmap.svg",
                   svg_heatmap("taxonomy grid (no grid search attached)", {}, {}, {}, {}));
    }
    write_file(dir + "/firing_histogram.svg", firing_histogram_svg(annotated));
    write_file(dir + "/report.json", report_to_json(annotated) + "\n");

    std::vector<std::string> paths;
    for (const auto& f : annotated.files) {
        paths.push_back(dir + "/" + f);
    }
    return paths;
}

}  // namespace steerlab::bench
