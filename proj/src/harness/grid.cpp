#include "fedthe/harness/grid.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <stdexcept>

#include "fedthe/data/streams.hpp"
#include "fedthe/fl/checkpoint.hpp"
#include "fedthe/fl/runtime.hpp"
#include "fedthe/tta/predict.hpp"

namespace fedthe::harness {

namespace {

struct GridError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool needs_fine_tuned(const std::vector<tta::Method>& methods) {
  return std::any_of(methods.begin(), methods.end(), [](tta::Method m) {
    return m == tta::Method::FedavgFt || m == tta::Method::MemoP;
  });
}

}  // namespace

std::vector<MetricsRecord> run_grid(const ExperimentConfig& config,
                                    const std::filesystem::path& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);

  std::ofstream metrics_out(out_dir / "metrics.txt", std::ios::trunc);
  std::ofstream etrace_out(out_dir / "etrace.csv", std::ios::trunc);
  std::ofstream timings_out(out_dir / "timings.txt", std::ios::trunc);
  if (!metrics_out || !etrace_out || !timings_out) {
    throw GridError("run_grid: cannot open output files under " + out_dir.string());
  }
  write_etrace_header(etrace_out);

  std::vector<MetricsRecord> all_records;
  const std::string ablation = ablation_tag(config.adapt, config.train.balanced_softmax);

  for (std::uint64_t seed : config.seeds) {
    const data::GeneratorSpec spec = config.generator_for_seed(seed);
    const std::vector<data::ClientBench> benches = data::build_benches(
        spec, config.data.n_per_class, config.partition.clients, config.partition.alpha,
        data::SplitFractions{}, config.severity, seed);

    fl::TrainConfig train_config = config.train;
    train_config.seed = seed;
    const fl::FederationResult trained =
        fl::run_training(benches, config.model_config(), train_config);
    fl::save_checkpoint(out_dir / ("checkpoint_seed" + std::to_string(seed)),
                        trained.server, trained.clients);

    std::vector<fl::FineTunedModel> fine_tuned(benches.size());
    if (needs_fine_tuned(config.methods)) {
      for (std::size_t k = 0; k < benches.size(); ++k) {
        fine_tuned[k] = fl::fedavg_ft(trained.server, benches[k], train_config);
      }
    }

    for (tta::Method method : config.methods) {
      for (std::size_t k = 0; k < benches.size(); ++k) {
        const tta::EvalContext ctx = tta::make_eval_context(
            trained.server, trained.clients[k], &fine_tuned[k], config.adapt,
            spec.within_class_std,
            nn::mix_seed(seed, 0xe7a1ULL + static_cast<std::uint64_t>(k)));
        for (data::StreamKind stream_kind : config.streams) {
          const auto start = std::chrono::steady_clock::now();
          tta::StreamResult result;
          try {
            result = tta::predict_stream(method, ctx, stream_kind,
                                         benches[k].stream(stream_kind));
          } catch (const std::exception& e) {
            throw GridError("run_grid failed at method=" + tta::to_string(method) +
                            " client=" + std::to_string(benches[k].client_id) +
                            " stream=" + data::to_string(stream_kind) +
                            " seed=" + std::to_string(seed) + ": " + e.what());
          }
          const auto stop = std::chrono::steady_clock::now();

          MetricsRecord record;
          record.method = tta::to_string(method);
          record.ablation = ablation;
          record.client = benches[k].client_id;
          record.stream = stream_kind;
          record.seed = seed;
          record.correct = result.num_correct;
          record.n_samples = static_cast<std::int64_t>(result.predictions.size());
          record.accuracy = result.accuracy();
          record.wall_time_sec =
              std::chrono::duration<double>(stop - start).count();

          metrics_out << format_metrics_line(record) << "\n";
          timings_out << record.method << " client=" << record.client
                      << " stream=" << data::to_string(stream_kind)
                      << " seed=" << seed << " sec=" << record.wall_time_sec << "\n";
          write_etrace_rows(etrace_out, result.e_trace);
          all_records.push_back(std::move(record));
        }
      }
    }
  }
  return all_records;
}

}  // namespace fedthe::harness
