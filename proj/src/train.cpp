#include "m3r/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

namespace m3r::nn {

void Standardizer::fit(const std::vector<aligner::EventSequence>& seqs,
                       int t_in, int met_dim) {
  if (seqs.empty()) throw EmptyDataset("standardizer fit on empty split");
  mean.setZero(met_dim);
  stdev.setZero(met_dim);

  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(met_dim);
  Eigen::RowVectorXd sum_sq = Eigen::RowVectorXd::Zero(met_dim);
  const std::size_t rows = seqs.size() * static_cast<std::size_t>(t_in);
  for (const auto& seq : seqs) {
    for (int t = 0; t < t_in; ++t) {
      for (int c = 0; c < met_dim; ++c) {
        const double v = seq.pws[static_cast<std::size_t>(t) * met_dim +
                                 static_cast<std::size_t>(c)];
        sum(c) += v;
        sum_sq(c) += v * v;
      }
    }
  }
  for (int c = 0; c < met_dim; ++c) {
    const double mu = sum(c) / static_cast<double>(rows);
    const double var =
        std::max(0.0, sum_sq(c) / static_cast<double>(rows) - mu * mu);
    mean(c) = static_cast<float>(mu);
    const double sd = std::sqrt(var);
    stdev(c) = sd > 0.0 ? static_cast<float>(sd) : 1.0f;
  }
}

Mat<float> Standardizer::apply(const aligner::EventSequence& seq,
                               int t_in) const {
  const int met_dim = static_cast<int>(mean.cols());
  Mat<float> out(t_in, met_dim);
  for (int t = 0; t < t_in; ++t)
    for (int c = 0; c < met_dim; ++c)
      out(t, c) = (seq.pws[static_cast<std::size_t>(t) * met_dim +
                           static_cast<std::size_t>(c)] -
                   mean(c)) /
                  stdev(c);
  return out;
}

std::vector<Sample<float>> make_samples(
    const std::vector<aligner::EventSequence>& seqs, const ModelConfig& cfg,
    const Standardizer& standardizer, int frame_ny, int frame_nx) {
  if (frame_ny != cfg.height || frame_nx != cfg.width || cfg.channels != 1)
    throw ShapeMismatch("dataset frames are " + std::to_string(frame_ny) + "x" +
                        std::to_string(frame_nx) +
                        "x1, model expects " + std::to_string(cfg.height) +
                        "x" + std::to_string(cfg.width) + "x" +
                        std::to_string(cfg.channels));
  if (cfg.met_dim != stationproc::kNumColumns)
    throw ShapeMismatch("dataset stores 20 station columns, model expects " +
                        std::to_string(cfg.met_dim));
  if (cfg.t_in + cfg.horizon > aligner::kWindowFrames)
    throw ShapeMismatch("t_in + horizon exceeds the 8-frame window");
  if (standardizer.mean.cols() != cfg.met_dim)
    throw ShapeMismatch("standardizer dimension differs from met_dim");

  const std::size_t cells =
      static_cast<std::size_t>(frame_ny) * static_cast<std::size_t>(frame_nx);
  std::vector<Sample<float>> out;
  out.reserve(seqs.size());
  for (const auto& seq : seqs) {
    Sample<float> s;
    s.radar.resize(cfg.t_in, static_cast<Eigen::Index>(cells));
    for (int t = 0; t < cfg.t_in; ++t)
      for (std::size_t c = 0; c < cells; ++c)
        s.radar(t, static_cast<Eigen::Index>(c)) =
            aligner::dequantize(seq.frames[static_cast<std::size_t>(t) * cells + c])
                .first;
    s.met = standardizer.apply(seq, cfg.t_in);
    s.target.resize(cfg.horizon, 1);
    for (int k = 0; k < cfg.horizon; ++k)
      s.target(k, 0) = seq.target[static_cast<std::size_t>(cfg.t_in + k)];
    s.last_precip = seq.target[static_cast<std::size_t>(cfg.t_in - 1)];
    out.push_back(std::move(s));
  }
  return out;
}

double learning_rate(int epoch, const TrainOptions& opt) {
  if (epoch < 1) throw ConfigError("epoch numbering is 1-based");
  if (opt.warmup_epochs > 0 && epoch <= opt.warmup_epochs)
    return opt.base_lr * static_cast<double>(epoch) /
           static_cast<double>(opt.warmup_epochs);
  if (opt.epochs <= opt.warmup_epochs) return opt.base_lr;
  const double progress =
      static_cast<double>(epoch - opt.warmup_epochs) /
      static_cast<double>(opt.epochs - opt.warmup_epochs);
  return opt.base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

AdamW::AdamW(ModelParams<float>& params, const TrainOptions& opt)
    : params_(params),
      beta1_(opt.beta1),
      beta2_(opt.beta2),
      eps_(opt.eps),
      weight_decay_(opt.weight_decay) {
  for (const auto& e : params.entries()) {
    m_.push_back(Mat<float>::Zero(e.value.rows(), e.value.cols()));
    v_.push_back(Mat<float>::Zero(e.value.rows(), e.value.cols()));
  }
}

void AdamW::step(double lr) {
  ++step_count_;
  const auto b1 = static_cast<float>(beta1_);
  const auto b2 = static_cast<float>(beta2_);
  const auto correction1 =
      static_cast<float>(1.0 - std::pow(beta1_, step_count_));
  const auto correction2 =
      static_cast<float>(1.0 - std::pow(beta2_, step_count_));
  const auto flr = static_cast<float>(lr);
  const auto feps = static_cast<float>(eps_);
  const auto fwd = static_cast<float>(weight_decay_);

  auto& entries = params_.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& e = entries[i];
    m_[i] = b1 * m_[i] + (1.0f - b1) * e.grad;
    v_[i].array() = b2 * v_[i].array() + (1.0f - b2) * e.grad.array().square();
    const auto m_hat = m_[i].array() / correction1;
    const auto v_hat = v_[i].array() / correction2;
    e.value.array() -=
        flr * (m_hat / (v_hat.sqrt() + feps) + fwd * e.value.array());
  }
}

namespace {

/// Fisher-Yates with an explicit engine so the visit order is identical on
/// every platform.
void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(idx[i - 1], idx[j]);
  }
}

/// Forward+backward for samples [begin, end); gradients land in bufs (or
/// the model's shared slots when bufs is null). Returns the summed squared
/// error. grad_scale multiplies the per-element error derivative.
double run_chunk(Model<float>& model, const std::vector<Sample<float>>& samples,
                 const std::vector<std::size_t>& order, std::size_t begin,
                 std::size_t end, float grad_scale,
                 std::vector<Mat<float>>* bufs) {
  double sse = 0.0;
  for (std::size_t s = begin; s < end; ++s) {
    const Sample<float>& sample = samples[order[s]];
    Graph<float> g;
    const int out = model.build_forward(g, sample.radar, sample.met, bufs);
    const Mat<float> err = g.value(out) - sample.target;
    sse += static_cast<double>(err.array().square().sum());
    g.backward(out, 2.0f * grad_scale * err);
  }
  return sse;
}

}  // namespace

TrainResult train(Model<float>& model, const aligner::DatasetSplit& data,
                  const TrainOptions& opt) {
  if (data.train.empty()) throw EmptyDataset("training split is empty");
  if (opt.epochs < 1 || opt.batch_size < 1 || opt.jobs < 1)
    throw ConfigError("epochs, batch_size and jobs must all be >= 1");
  const ModelConfig& cfg = model.config();

  TrainResult result;
  result.standardizer.fit(data.train, cfg.t_in, cfg.met_dim);
  const auto samples = make_samples(data.train, cfg, result.standardizer,
                                    data.frame_ny, data.frame_nx);

  model.init_params(opt.seed);
  AdamW optimizer(model.params(), opt);
  std::mt19937_64 shuffle_rng(opt.seed + 1);

  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const auto horizon = static_cast<double>(cfg.horizon);
  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    const double lr = learning_rate(epoch, opt);
    shuffle_indices(order, shuffle_rng);

    double epoch_sse = 0.0;
    for (std::size_t start = 0; start < samples.size();
         start += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t stop = std::min(
          samples.size(), start + static_cast<std::size_t>(opt.batch_size));
      const auto batch_n = stop - start;
      const auto grad_scale =
          static_cast<float>(1.0 / (static_cast<double>(batch_n) * horizon));

      model.params().zero_grad();
      const int jobs =
          std::min<int>(opt.jobs, static_cast<int>(batch_n));
      if (jobs <= 1) {
        epoch_sse += run_chunk(model, samples, order, start, stop, grad_scale,
                               nullptr);
      } else {
        // Contiguous chunks per worker; reduction below walks chunks in
        // order, so the result depends only on the jobs value.
        std::vector<std::vector<Mat<float>>> bufs(
            static_cast<std::size_t>(jobs));
        std::vector<double> sse(static_cast<std::size_t>(jobs), 0.0);
        std::vector<std::thread> workers;
        const std::size_t per = (batch_n + static_cast<std::size_t>(jobs) - 1) /
                                static_cast<std::size_t>(jobs);
        for (int w = 0; w < jobs; ++w) {
          const std::size_t b = start + static_cast<std::size_t>(w) * per;
          const std::size_t e = std::min(stop, b + per);
          if (b >= e) break;
          bufs[static_cast<std::size_t>(w)] = model.make_grad_buffers();
          workers.emplace_back([&, w, b, e] {
            sse[static_cast<std::size_t>(w)] =
                run_chunk(model, samples, order, b, e, grad_scale,
                          &bufs[static_cast<std::size_t>(w)]);
          });
        }
        for (auto& t : workers) t.join();
        auto& entries = model.params().entries();
        for (std::size_t w = 0; w < bufs.size(); ++w) {
          if (bufs[w].empty()) continue;
          epoch_sse += sse[w];
          for (std::size_t i = 0; i < entries.size(); ++i)
            entries[i].grad += bufs[w][i];
        }
      }
      optimizer.step(lr);
    }

    result.epoch_loss.push_back(
        epoch_sse / (static_cast<double>(samples.size()) * horizon));
    result.epoch_lr.push_back(lr);
    if (epoch == 1 || epoch == opt.epochs || epoch % 25 == 0)
      log_info("epoch " + std::to_string(epoch) + "/" +
               std::to_string(opt.epochs) + " lr " + std::to_string(lr) +
               " loss " + std::to_string(result.epoch_loss.back()));
  }
  return result;
}

EvalArrays predict_sequences(Model<float>& model,
                             const Standardizer& standardizer,
                             const std::vector<aligner::EventSequence>& seqs,
                             int frame_ny, int frame_nx) {
  const ModelConfig& cfg = model.config();
  const auto samples = make_samples(seqs, cfg, standardizer, frame_ny, frame_nx);

  EvalArrays out;
  out.pred.reserve(samples.size() * static_cast<std::size_t>(cfg.horizon));
  out.target.reserve(out.pred.capacity());
  out.persistence.reserve(out.pred.capacity());
  for (const auto& s : samples) {
    const Mat<float> pred = model.predict(s.radar, s.met);
    for (int k = 0; k < cfg.horizon; ++k) {
      out.pred.push_back(static_cast<double>(pred(k, 0)));
      out.target.push_back(static_cast<double>(s.target(k, 0)));
      out.persistence.push_back(static_cast<double>(s.last_precip));
    }
  }
  return out;
}

}  // namespace m3r::nn
