// A taxgen/1 generator with a fixed script, standing in for a model-backed
// generator in refinement tests.
//
//   scripted_generator <taxmorph> <rules.json> <mode>
//
// modes: two-stage (flat-rate candidate, then the reference), stubborn
// (flat-rate forever), oracle, silent (never answers), garbage.

#include <iostream>
#include <string>

#include "json.hpp"

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: scripted_generator <taxmorph> <rules.json> <mode>\n";
    return 2;
  }
  const std::string exe = argv[1], rules = argv[2], mode = argv[3];
  std::string line;
  int round = 0;
  while (std::getline(std::cin, line)) {
    ++round;
    const auto request = nlohmann::json::parse(line);
    const std::string scenario = std::to_string(request.at("scenario").get<int>());
    if (mode == "silent") continue;
    if (mode == "garbage") {
      std::cout << "here is your program" << std::endl;
      continue;
    }
    nlohmann::json command = {exe, "candidate", "--scenario", scenario, "--rules", rules};
    const bool flawed = mode == "stubborn" || (mode == "two-stage" && round == 1);
    if (flawed) {
      command.push_back("--mutant");
      command.push_back("flat_rate:0.12");
    }
    std::cout << nlohmann::json{{"candidate", {{"command", command}}}}.dump() << std::endl;
  }
  return 0;
}
