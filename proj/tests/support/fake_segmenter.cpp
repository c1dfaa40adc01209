// Stand-in for a third-party model speaking the external segmenter protocol.
//   echo           returns the positive click map as probabilities
//   wrong-height   reports and returns one extra row
//   exit-after N   exits without replying to request N+1
//   hang           handshakes, then never replies
//   bad-handshake  announces an unknown protocol
//   garbage        replies with a line that is not JSON
#include <cstdint>
#include <cstring>
#include <iostream>
#include <string>
#include <thread>

#include "json.hpp"

#include "clickseg/image_io.hpp"

namespace {

std::string f32_payload(const std::vector<std::uint8_t>& u8, std::size_t count) {
    std::vector<std::uint8_t> out;
    out.reserve(count * 4);
    for (std::size_t i = 0; i < count; ++i) {
        const float v = i < u8.size() && u8[i] != 0 ? 1.0f : 0.0f;
        std::uint32_t bits = 0;
        std::memcpy(&bits, &v, 4);
        for (int s = 0; s < 32; s += 8) {
            out.push_back(static_cast<std::uint8_t>((bits >> s) & 0xff));
        }
    }
    return clickseg::base64_encode(out);
}

}  // namespace

int main(int argc, char** argv) {
    const std::string mode = argc > 1 ? argv[1] : "echo";
    const int exit_after = argc > 2 ? std::stoi(argv[2]) : 0;

    if (mode == "bad-handshake") {
        std::cout << R"({"protocol":"other","version":7})" << std::endl;
        return 0;
    }
    std::cout << R"({"protocol":"clickseg-ext","version":1})" << std::endl;

    int handled = 0;
    std::string line;
    while (std::getline(std::cin, line)) {
        if (mode == "exit-after" && handled >= exit_after) {
            return 3;
        }
        if (mode == "hang") {
            std::this_thread::sleep_for(std::chrono::hours(1));
        }
        if (mode == "garbage") {
            std::cout << "not json" << std::endl;
            continue;
        }
        const auto req = nlohmann::json::parse(line);
        const int w = req.at("width").get<int>();
        int h = req.at("height").get<int>();
        const auto pos = clickseg::base64_decode(req.at("pos_map").get<std::string>());
        if (mode == "wrong-height") {
            ++h;
        }
        nlohmann::json resp{{"id", req.at("id")},
                            {"width", w},
                            {"height", h},
                            {"prob_map", f32_payload(pos, static_cast<std::size_t>(w) * h)}};
        std::cout << resp.dump() << std::endl;
        ++handled;
    }
    return 0;
}
