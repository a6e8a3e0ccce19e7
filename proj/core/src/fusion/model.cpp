#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "mmsi/errors.hpp"
#include "mmsi/fusion.hpp"
#include "mmsi/hashing.hpp"

namespace mmsi::fusion {
namespace {

constexpr double kProbabilityFloor = 1e-12;

std::vector<int> embedder_widths(const FusionConfig& c, Block b) {
  return {c.embedder_input_width(b), c.dims.shared, c.dims.shared};
}

std::vector<int> classifier_widths(const FusionConfig& c) {
  std::vector<int> w{c.classifier_input_width()};
  w.insert(w.end(), c.dims.classifier_hidden.begin(), c.dims.classifier_hidden.end());
  w.push_back(c.dims.classes);
  return w;
}

std::vector<int> name_widths(const FusionConfig& c) {
  return {entity::kNameLength, entity::kNameHidden, c.dims.name_block};
}

template <typename T>
void add_mlp(std::vector<NamedParam<T>>& out, const std::string& prefix, nn::Mlp<T>& mlp) {
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    out.push_back({fmt::format("{}.{}.weight", prefix, l), &mlp.layers[l].weight});
    out.push_back({fmt::format("{}.{}.bias", prefix, l), &mlp.layers[l].bias});
  }
}

template <typename T>
nn::Vector<T> to_t(const Eigen::VectorXd& v) {
  return v.template cast<T>();
}

// Intermediate values the batched backward pass needs.
template <typename T>
struct BatchTape {
  std::array<typename nn::Mlp<T>::Tape, 4> embed;
  std::vector<Eigen::Index> clip_offset;  // first column of example b in the clip-level matrices
  typename nn::Lstm<T>::Tape lstm;
  typename nn::Mlp<T>::Tape caption_names, transcript_names;
  std::vector<Eigen::Index> caption_owner, transcript_owner;
  std::vector<int> caption_count, transcript_count;
  typename nn::Mlp<T>::Tape classifier;
};

template <typename T>
nn::Matrix<T> pool_names(std::span<const ExampleFeatures* const> batch, bool caption,
                         const nn::Mlp<T>& net, int width, typename nn::Mlp<T>::Tape* tape,
                         std::vector<Eigen::Index>* owner_out, std::vector<int>* count_out) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  std::vector<entity::CharEncoding> encs;
  std::vector<Eigen::Index> owner;
  std::vector<int> count(batch.size(), 0);
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto& list = caption ? batch[b]->caption_names : batch[b]->transcript_names;
    for (const auto& e : list) {
      encs.push_back(e);
      owner.push_back(b);
    }
    count[b] = static_cast<int>(list.size());
  }
  nn::Matrix<T> pooled = nn::Matrix<T>::Zero(width, n);
  if (!encs.empty()) {
    const nn::Matrix<T> emb = net.forward(entity::name_network_input<T>(encs), tape);
    for (std::size_t j = 0; j < encs.size(); ++j) pooled.col(owner[j]) += emb.col(j);
    for (Eigen::Index b = 0; b < n; ++b) {
      if (count[b] > 0) pooled.col(b) /= static_cast<T>(count[b]);
    }
  }
  if (owner_out != nullptr) *owner_out = std::move(owner);
  if (count_out != nullptr) *count_out = std::move(count);
  return pooled;
}

template <typename T>
nn::Matrix<T> forward_impl(std::span<const ExampleFeatures* const> batch, const FusionConfig& config,
                           const FusionParams<T>& params, BatchTape<T>* tape) {
  if (batch.empty()) throw UsageError("empty batch");
  for (const ExampleFeatures* ex : batch) check_example(*ex, config);
  const auto n = static_cast<Eigen::Index>(batch.size());
  const int shared = config.dims.shared;

  int steps = 0;
  std::vector<Eigen::Index> offset(batch.size());
  Eigen::Index total_clips = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    offset[b] = total_clips;
    total_clips += batch[b]->clip_count;
    steps = std::max(steps, batch[b]->clip_count);
  }

  std::array<nn::Matrix<T>, 4> emb;
  for (Block blk : kClipBlocks) {
    if (!config.has(blk)) continue;
    const std::size_t k = block_index(blk);
    const nn::Mlp<T>& mlp = *params.embedders[k];
    nn::Matrix<T> x;
    if (blk == Block::video || blk == Block::object) {
      x.resize(config.embedder_input_width(blk), total_clips);
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const Eigen::MatrixXf& src = blk == Block::video ? batch[b]->video : batch[b]->object;
        x.middleCols(offset[b], batch[b]->clip_count) =
            src.leftCols(batch[b]->clip_count).template cast<T>();
      }
    } else {
      x.resize(config.embedder_input_width(blk), n);
      for (Eigen::Index b = 0; b < n; ++b) {
        x.col(b) = (blk == Block::caption ? batch[b]->caption : batch[b]->transcript).template cast<T>();
      }
    }
    emb[k] = mlp.forward(x, tape != nullptr ? &tape->embed[k] : nullptr);
  }

  const int lstm_in = config.lstm_input_width();
  std::vector<nn::Matrix<T>> xs(static_cast<std::size_t>(steps));
  std::vector<nn::RowArray<T>> masks(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    nn::Matrix<T>& xt = xs[t];
    xt = nn::Matrix<T>::Zero(lstm_in, n);
    masks[t] = nn::RowArray<T>::Zero(n);
    for (Eigen::Index b = 0; b < n; ++b) {
      if (t >= batch[b]->clip_count) continue;
      masks[t](b) = T(1);
      Eigen::Index row = 0;
      for (Block blk : kClipBlocks) {
        if (!config.has(blk)) continue;
        const std::size_t k = block_index(blk);
        const Eigen::Index col = blk == Block::video || blk == Block::object ? offset[b] + t : b;
        xt.block(row, b, shared, 1) = emb[k].col(col);
        row += shared;
      }
    }
  }
  const nn::Matrix<T> h = params.lstm.forward(xs, masks, tape != nullptr ? &tape->lstm : nullptr);

  nn::Matrix<T> z(config.classifier_input_width(), n);
  Eigen::Index row = 0;
  z.topRows(h.rows()) = h;
  row += h.rows();
  if (config.has(Block::names)) {
    const int w = config.dims.name_block;
    z.middleRows(row, w) =
        pool_names<T>(batch, true, *params.names, w, tape ? &tape->caption_names : nullptr,
                      tape ? &tape->caption_owner : nullptr, tape ? &tape->caption_count : nullptr);
    row += w;
    z.middleRows(row, w) = pool_names<T>(batch, false, *params.names, w,
                                         tape ? &tape->transcript_names : nullptr,
                                         tape ? &tape->transcript_owner : nullptr,
                                         tape ? &tape->transcript_count : nullptr);
    row += w;
  }
  if (config.has(Block::faces)) {
    for (Eigen::Index b = 0; b < n; ++b) {
      z.block(row, b, config.dims.face_block, 1) = batch[b]->faces.template cast<T>();
    }
    row += config.dims.face_block;
  }
  if (config.has(Block::reactions)) {
    for (Eigen::Index b = 0; b < n; ++b) {
      z.block(row, b, config.dims.reaction_block, 1) = batch[b]->reactions.template cast<T>();
    }
    row += config.dims.reaction_block;
  }
  if (tape != nullptr) tape->clip_offset = std::move(offset);
  return params.classifier.forward(z, tape != nullptr ? &tape->classifier : nullptr);
}

template <typename T>
void names_backward(const nn::Matrix<T>& dpooled, const std::vector<Eigen::Index>& owner,
                    const std::vector<int>& count, const typename nn::Mlp<T>::Tape& tape,
                    const nn::Mlp<T>& net, nn::Mlp<T>& grad) {
  if (owner.empty()) return;
  nn::Matrix<T> d(dpooled.rows(), static_cast<Eigen::Index>(owner.size()));
  for (std::size_t j = 0; j < owner.size(); ++j) {
    d.col(j) = dpooled.col(owner[j]) / static_cast<T>(count[owner[j]]);
  }
  net.backward(d, tape, grad);
}

}  // namespace

template <typename T>
FusionParams<T> init_params(const FusionConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(mix64(seed ^ 0x696e6974ULL));
  FusionParams<T> p;
  for (Block b : kClipBlocks) {
    if (config.has(b)) p.embedders[block_index(b)] = nn::Mlp<T>::init(embedder_widths(config, b), rng);
  }
  if (config.has(Block::names)) p.names = nn::Mlp<T>::init(name_widths(config), rng);
  p.lstm = nn::Lstm<T>::init(config.lstm_input_width(), config.dims.lstm_hidden, rng);
  p.classifier = nn::Mlp<T>::init(classifier_widths(config), rng);
  return p;
}

template <typename T>
FusionParams<T> zero_params(const FusionConfig& config) {
  config.validate();
  FusionParams<T> p;
  for (Block b : kClipBlocks) {
    if (config.has(b)) p.embedders[block_index(b)] = nn::Mlp<T>::zeros(embedder_widths(config, b));
  }
  if (config.has(Block::names)) p.names = nn::Mlp<T>::zeros(name_widths(config));
  p.lstm = nn::Lstm<T>::zeros(config.lstm_input_width(), config.dims.lstm_hidden);
  p.classifier = nn::Mlp<T>::zeros(classifier_widths(config));
  return p;
}

template <typename T>
std::vector<NamedParam<T>> named_params(FusionParams<T>& params) {
  std::vector<NamedParam<T>> out;
  for (Block b : kClipBlocks) {
    auto& e = params.embedders[block_index(b)];
    if (e) add_mlp(out, fmt::format("embed.{}", block_name(b)), *e);
  }
  if (params.names) add_mlp(out, "names", *params.names);
  out.push_back({"lstm.w_input", &params.lstm.w_input});
  out.push_back({"lstm.w_hidden", &params.lstm.w_hidden});
  out.push_back({"lstm.bias", &params.lstm.bias});
  add_mlp(out, "classifier", params.classifier);
  return out;
}

template <typename T>
std::size_t parameter_count(const FusionParams<T>& params) {
  std::size_t n = 0;
  for (const NamedParam<T>& p : named_params(const_cast<FusionParams<T>&>(params))) {
    n += static_cast<std::size_t>(p.tensor->size());
  }
  return n;
}

template <typename T>
nn::Vector<T> embed_modality(const nn::Vector<T>& feature, const nn::Mlp<T>& params) {
  if (feature.size() != params.in_width()) {
    throw DataError(fmt::format("modality feature has width {}, embedder expects {}", feature.size(),
                                params.in_width()));
  }
  return params.forward(feature);
}

template <typename T>
nn::Vector<T> fuse_clip_sequence(const ExampleFeatures& ex, const FusionConfig& config,
                                 const FusionParams<T>& params) {
  check_example(ex, config);
  std::array<nn::Vector<T>, 4> text_emb;
  for (Block b : {Block::caption, Block::transcript}) {
    if (!config.has(b)) continue;
    const Eigen::VectorXf& f = b == Block::caption ? ex.caption : ex.transcript;
    text_emb[block_index(b)] = embed_modality<T>(f.cast<T>(), *params.embedders[block_index(b)]);
  }
  std::vector<nn::Matrix<T>> xs;
  std::vector<nn::RowArray<T>> masks;
  for (int t = 0; t < ex.clip_count; ++t) {
    nn::Vector<T> x(config.lstm_input_width());
    Eigen::Index row = 0;
    for (Block b : kClipBlocks) {
      if (!config.has(b)) continue;
      nn::Vector<T> e;
      if (b == Block::video) {
        e = embed_modality<T>(ex.video.col(t).cast<T>(), *params.embedders[block_index(b)]);
      } else if (b == Block::object) {
        e = embed_modality<T>(ex.object.col(t).cast<T>(), *params.embedders[block_index(b)]);
      } else {
        e = text_emb[block_index(b)];
      }
      x.segment(row, e.size()) = e;
      row += e.size();
    }
    xs.push_back(x);
    masks.push_back(nn::RowArray<T>::Ones(1));
  }
  return params.lstm.forward(xs, masks).col(0);
}

template <typename T>
nn::Vector<T> assemble_classifier_input(const nn::Vector<T>& summary, const ClassifierExtras& extras,
                                        const FusionConfig& config) {
  if (summary.size() != config.dims.lstm_hidden) {
    throw DataError(fmt::format("clip summary has width {}, config expects {}", summary.size(),
                                config.dims.lstm_hidden));
  }
  nn::Vector<T> out(config.classifier_input_width());
  Eigen::Index row = 0;
  auto put = [&](std::string_view what, const std::optional<Eigen::VectorXd>& v, int width) {
    if (!v) throw DataError(fmt::format("{} block is enabled but missing", what));
    if (v->size() != width) {
      throw DataError(fmt::format("{} block has width {}, config expects {}", what, v->size(), width));
    }
    out.segment(row, width) = to_t<T>(*v);
    row += width;
  };
  out.head(summary.size()) = summary;
  row = summary.size();
  if (config.has(Block::names)) {
    put("caption-names", extras.caption_names, config.dims.name_block);
    put("transcript-names", extras.transcript_names, config.dims.name_block);
  }
  if (config.has(Block::faces)) put("faces", extras.faces, config.dims.face_block);
  if (config.has(Block::reactions)) put("reactions", extras.reactions, config.dims.reaction_block);
  return out;
}

template <typename T>
Classification<T> classify(const nn::Vector<T>& input, const nn::Mlp<T>& params) {
  if (input.size() != params.in_width()) {
    throw DataError(fmt::format("classifier input has width {}, expected {}", input.size(),
                                params.in_width()));
  }
  Classification<T> c;
  c.logits = params.forward(input);
  c.probabilities = nn::softmax<T>(c.logits);
  return c;
}

template <typename T>
T loss(const nn::Matrix<T>& probabilities, std::span<const int> labels) {
  if (static_cast<std::size_t>(probabilities.cols()) != labels.size() || labels.empty()) {
    throw UsageError("loss needs one label per probability column");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] < 0 || labels[j] >= probabilities.rows()) throw UsageError("label out of range");
    const double p = static_cast<double>(probabilities(labels[j], static_cast<Eigen::Index>(j)));
    total -= std::log(std::max(p, kProbabilityFloor));
  }
  return static_cast<T>(total / static_cast<double>(labels.size()));
}

template <typename T>
Classification<T> forward_example(const ExampleFeatures& ex, const FusionConfig& config,
                                  const FusionParams<T>& params) {
  const nn::Vector<T> summary = fuse_clip_sequence<T>(ex, config, params);
  ClassifierExtras extras;
  if (config.has(Block::names)) {
    auto pooled = [&](const std::vector<entity::CharEncoding>& list) {
      std::vector<nn::Vector<T>> emb;
      for (const auto& e : list) emb.push_back(entity::embed_name<T>(e, *params.names));
      return entity::pool_name_embeddings<T>(emb).template cast<double>().eval();
    };
    extras.caption_names = pooled(ex.caption_names);
    extras.transcript_names = pooled(ex.transcript_names);
  }
  if (config.has(Block::faces)) extras.faces = ex.faces.cast<double>();
  if (config.has(Block::reactions)) extras.reactions = ex.reactions.cast<double>();
  return classify<T>(assemble_classifier_input<T>(summary, extras, config), params.classifier);
}

template <typename T>
nn::Matrix<T> forward_batch(std::span<const ExampleFeatures* const> batch, const FusionConfig& config,
                            const FusionParams<T>& params) {
  return forward_impl<T>(batch, config, params, nullptr);
}

template <typename T>
T loss_and_gradient(std::span<const ExampleFeatures* const> batch, const FusionConfig& config,
                    const FusionParams<T>& params, FusionParams<T>& grad) {
  BatchTape<T> tape;
  const nn::Matrix<T> logits = forward_impl<T>(batch, config, params, &tape);
  const nn::Matrix<T> probs = nn::softmax<T>(logits);
  const auto n = static_cast<Eigen::Index>(batch.size());
  std::vector<int> labels(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) labels[b] = batch[b]->label;
  const T value = loss<T>(probs, labels);

  nn::Matrix<T> dlogits = probs;
  for (Eigen::Index b = 0; b < n; ++b) dlogits(labels[b], b) -= T(1);
  dlogits /= static_cast<T>(n);

  const nn::Matrix<T> dz = params.classifier.backward(dlogits, tape.classifier, grad.classifier);
  const int hidden = config.dims.lstm_hidden;
  Eigen::Index row = hidden;
  if (config.has(Block::names)) {
    const int w = config.dims.name_block;
    names_backward<T>(dz.middleRows(row, w), tape.caption_owner, tape.caption_count,
                      tape.caption_names, *params.names, *grad.names);
    row += w;
    names_backward<T>(dz.middleRows(row, w), tape.transcript_owner, tape.transcript_count,
                      tape.transcript_names, *params.names, *grad.names);
  }

  const std::vector<nn::Matrix<T>> dxs = params.lstm.backward(dz.topRows(hidden), tape.lstm, grad.lstm);
  const int shared = config.dims.shared;
  Eigen::Index lrow = 0;
  for (Block blk : kClipBlocks) {
    if (!config.has(blk)) continue;
    const std::size_t k = block_index(blk);
    nn::Matrix<T> de;
    if (blk == Block::video || blk == Block::object) {
      Eigen::Index total = 0;
      for (const ExampleFeatures* ex : batch) total += ex->clip_count;
      de = nn::Matrix<T>::Zero(shared, total);
      for (Eigen::Index b = 0; b < n; ++b) {
        for (int t = 0; t < batch[b]->clip_count; ++t) {
          de.col(tape.clip_offset[b] + t) = dxs[t].block(lrow, b, shared, 1);
        }
      }
    } else {
      de = nn::Matrix<T>::Zero(shared, n);
      for (const nn::Matrix<T>& dx : dxs) de += dx.middleRows(lrow, shared);
    }
    params.embedders[k]->backward(de, tape.embed[k], *grad.embedders[k]);
    lrow += shared;
  }
  return value;
}

#define MMSI_INSTANTIATE(T)                                                                        \
  template FusionParams<T> init_params<T>(const FusionConfig&, std::uint64_t);                     \
  template FusionParams<T> zero_params<T>(const FusionConfig&);                                    \
  template std::vector<NamedParam<T>> named_params<T>(FusionParams<T>&);                           \
  template std::size_t parameter_count<T>(const FusionParams<T>&);                                 \
  template nn::Vector<T> embed_modality<T>(const nn::Vector<T>&, const nn::Mlp<T>&);               \
  template nn::Vector<T> fuse_clip_sequence<T>(const ExampleFeatures&, const FusionConfig&,        \
                                               const FusionParams<T>&);                            \
  template nn::Vector<T> assemble_classifier_input<T>(const nn::Vector<T>&,                        \
                                                      const ClassifierExtras&, const FusionConfig&); \
  template Classification<T> classify<T>(const nn::Vector<T>&, const nn::Mlp<T>&);                 \
  template T loss<T>(const nn::Matrix<T>&, std::span<const int>);                                  \
  template Classification<T> forward_example<T>(const ExampleFeatures&, const FusionConfig&,       \
                                                const FusionParams<T>&);                           \
  template nn::Matrix<T> forward_batch<T>(std::span<const ExampleFeatures* const>,                 \
                                          const FusionConfig&, const FusionParams<T>&);            \
  template T loss_and_gradient<T>(std::span<const ExampleFeatures* const>, const FusionConfig&,    \
                                  const FusionParams<T>&, FusionParams<T>&);

MMSI_INSTANTIATE(float)
MMSI_INSTANTIATE(double)
#undef MMSI_INSTANTIATE

}  // namespace mmsi::fusion
