// Reference external backend speaking the DST1 file protocol. Reads
// request.json + input.dst from the work directory given as the single
// argument, answers with response.json (+ output.dst for segmentation).
// Runs the same baselines as the in-process handle, so it doubles as a
// protocol conformance fixture.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "derm/backend.hpp"
#include "derm/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: %s <workdir>\n", argv[0]);
        return 64;
    }
    const fs::path dir = argv[1];
    try {
        json request;
        {
            std::ifstream in(dir / "request.json");
            if (!in) {
                std::fprintf(stderr, "missing request.json\n");
                return 65;
            }
            request = json::parse(in);
        }
        const std::string task = request.at("task").get<std::string>();
        const derm::Tensor input = derm::read_tensor(dir / "input.dst");

        json response;
        if (task == "detect") {
            const derm::RasterImage img =
                derm::raster_from_tensor(input, derm::ColorSpace::Srgb);
            response["detections"] = json::array();
            for (const derm::Detection& d : derm::baseline_detector(img)) {
                response["detections"].push_back({{"x0", d.box.x0},
                                                  {"y0", d.box.y0},
                                                  {"x1", d.box.x1},
                                                  {"y1", d.box.y1},
                                                  {"score", d.score}});
            }
        } else if (task == "segment") {
            const derm::ChannelStack stack = derm::stack_from_tensor(input);
            const derm::ProbabilityMap out = derm::baseline_segmenter(stack);
            derm::write_tensor(dir / "output.dst", derm::to_tensor(out));
            response["status"] = "ok";
        } else {
            std::fprintf(stderr, "unknown task '%s'\n", task.c_str());
            return 65;
        }

        std::ofstream out(dir / "response.json");
        out << response.dump(2) << '\n';
        if (!out) {
            std::fprintf(stderr, "cannot write response.json\n");
            return 66;
        }
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    }
}
