#include <iostream>
#include <string>
#include <vector>

#include "firzen/cli/commands.hpp"

namespace {

void usage(std::ostream& os) {
    os << "usage: firzen <verb> --config PATH [options]\n"
          "verbs:\n"
          "  synth              generate a clustered synthetic dataset\n"
          "  build              build splits, knowledge graph, and frozen graph bundle\n"
          "  train              run alternating training and save a checkpoint\n"
          "  eval               evaluate a checkpoint (all-ranking protocol)\n"
          "  export-embeddings  dump final item embeddings with warm/cold tags\n"
          "  inject-noise       write a noise-injected copy of the knowledge graph\n"
          "options:\n"
          "  --config PATH      experiment config (key = value lines), required\n"
          "  --seed N           override the config seed\n"
          "  --checkpoint PATH  checkpoint file for eval/export (default: output dir)\n"
          "  --setting S        cold|warm|normal_cold, repeatable (eval only)\n"
          "  --ablate LIST      comma list of branches to disable: ba,ka,ma_text,ma_image,ms\n"
          "environment:\n"
          "  FIRZEN_OUTPUT_ROOT  prefix for the config's output_dir when set\n";
}

}  // namespace

int main(int argc, char** argv) {
    using namespace firzen;
    if (argc < 2) {
        usage(std::cerr);
        return 2;
    }
    std::string verb = argv[1];
    if (verb == "--help" || verb == "-h" || verb == "help") {
        usage(std::cout);
        return 0;
    }

    std::string config_path, checkpoint_path, ablate;
    std::vector<std::string> settings;
    bool have_seed = false;
    std::uint64_t seed = 0;
    try {
        for (int i = 2; i < argc; ++i) {
            std::string arg = argv[i];
            auto value = [&]() -> std::string {
                if (i + 1 >= argc) throw std::runtime_error(arg + " needs a value");
                return argv[++i];
            };
            if (arg == "--config") config_path = value();
            else if (arg == "--seed") {
                seed = std::stoull(value());
                have_seed = true;
            } else if (arg == "--checkpoint") checkpoint_path = value();
            else if (arg == "--setting") settings.push_back(value());
            else if (arg == "--ablate") ablate = value();
            else throw std::runtime_error("unknown option " + arg);
        }
        if (config_path.empty()) throw std::runtime_error("--config is required");

        ExperimentConfig cfg = cli::load_experiment_config(config_path);
        if (have_seed) cfg.train.seed = seed;
        if (!ablate.empty()) cli::apply_ablations(cfg.train, ablate);

        if (verb == "synth") cli::cmd_synth(cfg, std::cout);
        else if (verb == "build") cli::cmd_build(cfg, std::cout);
        else if (verb == "train") cli::cmd_train(cfg, std::cout);
        else if (verb == "eval") cli::cmd_eval(cfg, checkpoint_path, settings, std::cout);
        else if (verb == "export-embeddings")
            cli::cmd_export_embeddings(cfg, checkpoint_path, std::cout);
        else if (verb == "inject-noise") cli::cmd_inject_noise(cfg, std::cout);
        else {
            usage(std::cerr);
            return 2;
        }
    } catch (const std::exception& e) {
        std::cerr << "firzen " << verb << ": " << e.what() << "\n";
        return 1;
    }
    return 0;
}
