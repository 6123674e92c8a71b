#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pcgpt/checkpoint.hpp"
#include "pcgpt/common.hpp"
#include "pcgpt/optim.hpp"
#include "pcgpt/tensor.hpp"
#include "pcgpt/trajectory.hpp"

namespace pcgpt {

struct ModelConfig {
    int context_steps = 16;  // K, timesteps per window
    int d_model = 128;
    int n_layers = 3;
    int n_heads = 4;
    int d_ff = 512;
    double dropout = 0.1;
    int item_vocab = kTileCount;
    int width = 5;
    int height = 5;

    int cells() const { return width * height; }
    int state_dim() const { return cells() * item_vocab; }
    int action_dim() const { return item_vocab + width + height; }

    void validate() const {
        if (context_steps < 1 || d_model < 1 || n_layers < 1 || n_heads < 1 || d_ff < 1)
            throw ConfigError("model config: dimensions must be positive");
        if (d_model % n_heads != 0) throw ConfigError("model config: n_heads must divide d_model");
        if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model config: dropout outside [0,1)");
        if (item_vocab != kTileCount)
            throw ConfigError("model config: item vocab must match the tile vocabulary");
        if (width < 1 || height < 1) throw ConfigError("model config: bad grid dims");
    }

    nlohmann::json to_json() const {
        return {{"context_steps", context_steps}, {"d_model", d_model}, {"n_layers", n_layers},
                {"n_heads", n_heads},             {"d_ff", d_ff},       {"dropout", dropout},
                {"item_vocab", item_vocab},       {"width", width},     {"height", height}};
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig cfg;
        cfg.context_steps = j.at("context_steps").get<int>();
        cfg.d_model = j.at("d_model").get<int>();
        cfg.n_layers = j.at("n_layers").get<int>();
        cfg.n_heads = j.at("n_heads").get<int>();
        cfg.d_ff = j.at("d_ff").get<int>();
        cfg.dropout = j.at("dropout").get<double>();
        cfg.item_vocab = j.at("item_vocab").get<int>();
        cfg.width = j.at("width").get<int>();
        cfg.height = j.at("height").get<int>();
        cfg.validate();
        return cfg;
    }
};

/// Flat host-side batch. Targets double as the recorded actions fed to the
/// context stream; loss_mask marks the supervised (non-padded) slots.
struct ModelInput {
    int B = 0;
    int K = 0;
    std::vector<double> rtg;        // B*K
    std::vector<int> states;        // B*K*cells tile codes
    std::vector<int> act_item;      // B*K
    std::vector<int> act_x;         // B*K
    std::vector<int> act_y;         // B*K
    std::vector<uint8_t> loss_mask; // B*K
};

inline ModelInput input_from_windows(const std::vector<TrainingWindow>& batch,
                                     const ModelConfig& cfg) {
    if (batch.empty()) throw std::invalid_argument("input_from_windows: empty batch");
    ModelInput in;
    in.B = static_cast<int>(batch.size());
    in.K = cfg.context_steps;
    const int cells = cfg.cells();
    in.rtg.reserve(static_cast<size_t>(in.B) * in.K);
    in.states.reserve(static_cast<size_t>(in.B) * in.K * cells);
    for (const TrainingWindow& w : batch) {
        if (w.K != in.K) throw std::invalid_argument("input_from_windows: window K mismatch");
        for (int k = 0; k < in.K; ++k) {
            in.rtg.push_back(w.rtg[static_cast<size_t>(k)]);
            const auto& grid = w.states[static_cast<size_t>(k)];
            if (static_cast<int>(grid.size()) != cells)
                throw std::invalid_argument("input_from_windows: state size mismatch");
            in.states.insert(in.states.end(), grid.begin(), grid.end());
            const EditAction& a = w.actions[static_cast<size_t>(k)];
            in.act_item.push_back(static_cast<int>(a.item));
            in.act_x.push_back(a.x);
            in.act_y.push_back(a.y);
            in.loss_mask.push_back(w.mask[static_cast<size_t>(k)]);
        }
    }
    return in;
}

/// Token visibility over the packed [context stream | query stream] sequence
/// of length 2K. Context token i sees context 0..i. Query token t sees
/// context 0..t-1 plus itself, never its own step's context token (which
/// carries the action being predicted).
inline std::vector<uint8_t> build_attention_mask(int K) {
    const int T = 2 * K;
    std::vector<uint8_t> mask(static_cast<size_t>(T) * T, 0);
    for (int i = 0; i < K; ++i)
        for (int j = 0; j <= i; ++j) mask[static_cast<size_t>(i) * T + j] = 1;
    for (int t = 0; t < K; ++t) {
        for (int j = 0; j < t; ++j) mask[static_cast<size_t>(K + t) * T + j] = 1;
        mask[static_cast<size_t>(K + t) * T + (K + t)] = 1;
    }
    return mask;
}

template <class S>
struct ModelOutput {
    num::Tensor<S> item_logits;  // [B, K, item_vocab]
    num::Tensor<S> x_logits;     // [B, K, width]
    num::Tensor<S> y_logits;     // [B, K, height]
};

/// Return-conditioned edit model: shared per-modality linear embeddings, a
/// learned per-slot time embedding, a stack block fusing the three modality
/// tokens of a timestep into one transformer token, a pre-norm causal
/// transformer encoder over the two-stream sequence, and three classification
/// heads read from the query stream.
template <class S>
class PcgptModel {
public:
    using Tens = num::Tensor<S>;

    ModelConfig cfg;

    Tens rtg_w, rtg_b;
    Tens state_w, state_b;
    Tens action_w, action_b;
    Tens action_mask_emb;  // substitutes for the hidden current action
    Tens time_embed;       // [K, d]
    Tens stack_w, stack_b, stack_ln_g, stack_ln_b;

    struct Block {
        Tens ln1_g, ln1_b;
        Tens wq, bq, wk, bk, wv, bv, wo, bo;
        Tens ln2_g, ln2_b;
        Tens ff_w1, ff_b1, ff_w2, ff_b2;
    };
    std::vector<Block> blocks;

    Tens final_ln_g, final_ln_b;
    Tens head_item_w, head_item_b, head_x_w, head_x_b, head_y_w, head_y_b;

    static PcgptModel init(const ModelConfig& cfg, uint64_t seed) {
        cfg.validate();
        PcgptModel m;
        m.cfg = cfg;
        Rng rng(derive_seed(seed, 0x7a31));
        const double std_w = 0.02;
        const int d = cfg.d_model;

        auto w = [&](std::vector<int> shape) { return Tens::randn(std::move(shape), rng, std_w); };
        auto zeros = [&](std::vector<int> shape) { return Tens::zeros(std::move(shape), true); };
        auto ones = [&](int n) {
            return Tens::from({n}, std::vector<S>(static_cast<size_t>(n), S(1)), true);
        };

        m.rtg_w = w({1, d});
        m.rtg_b = zeros({d});
        m.state_w = w({cfg.state_dim(), d});
        m.state_b = zeros({d});
        m.action_w = w({cfg.action_dim(), d});
        m.action_b = zeros({d});
        m.action_mask_emb = w({d});
        m.time_embed = w({cfg.context_steps, d});
        m.stack_w = w({3 * d, d});
        m.stack_b = zeros({d});
        m.stack_ln_g = ones(d);
        m.stack_ln_b = zeros({d});
        for (int l = 0; l < cfg.n_layers; ++l) {
            Block b;
            b.ln1_g = ones(d);
            b.ln1_b = zeros({d});
            b.wq = w({d, d});
            b.bq = zeros({d});
            b.wk = w({d, d});
            b.bk = zeros({d});
            b.wv = w({d, d});
            b.bv = zeros({d});
            b.wo = w({d, d});
            b.bo = zeros({d});
            b.ln2_g = ones(d);
            b.ln2_b = zeros({d});
            b.ff_w1 = w({d, cfg.d_ff});
            b.ff_b1 = zeros({cfg.d_ff});
            b.ff_w2 = w({cfg.d_ff, d});
            b.ff_b2 = zeros({d});
            m.blocks.push_back(std::move(b));
        }
        m.final_ln_g = ones(d);
        m.final_ln_b = zeros({d});
        m.head_item_w = w({d, cfg.item_vocab});
        m.head_item_b = zeros({cfg.item_vocab});
        m.head_x_w = w({d, cfg.width});
        m.head_x_b = zeros({cfg.width});
        m.head_y_w = w({d, cfg.height});
        m.head_y_b = zeros({cfg.height});
        return m;
    }

    /// Canonical parameter manifest; checkpoint blocks follow this order.
    std::vector<std::pair<std::string, Tens>> named_params() const {
        std::vector<std::pair<std::string, Tens>> out = {
            {"embed.rtg.w", rtg_w},         {"embed.rtg.b", rtg_b},
            {"embed.state.w", state_w},     {"embed.state.b", state_b},
            {"embed.action.w", action_w},   {"embed.action.b", action_b},
            {"embed.action_mask", action_mask_emb},
            {"time_embed", time_embed},
            {"stack.proj.w", stack_w},      {"stack.proj.b", stack_b},
            {"stack.ln.g", stack_ln_g},     {"stack.ln.b", stack_ln_b},
        };
        for (size_t l = 0; l < blocks.size(); ++l) {
            const std::string p = "layer" + std::to_string(l) + ".";
            const Block& b = blocks[l];
            out.emplace_back(p + "ln1.g", b.ln1_g);
            out.emplace_back(p + "ln1.b", b.ln1_b);
            out.emplace_back(p + "attn.wq", b.wq);
            out.emplace_back(p + "attn.bq", b.bq);
            out.emplace_back(p + "attn.wk", b.wk);
            out.emplace_back(p + "attn.bk", b.bk);
            out.emplace_back(p + "attn.wv", b.wv);
            out.emplace_back(p + "attn.bv", b.bv);
            out.emplace_back(p + "attn.wo", b.wo);
            out.emplace_back(p + "attn.bo", b.bo);
            out.emplace_back(p + "ln2.g", b.ln2_g);
            out.emplace_back(p + "ln2.b", b.ln2_b);
            out.emplace_back(p + "ff.w1", b.ff_w1);
            out.emplace_back(p + "ff.b1", b.ff_b1);
            out.emplace_back(p + "ff.w2", b.ff_w2);
            out.emplace_back(p + "ff.b2", b.ff_b2);
        }
        out.emplace_back("final_ln.g", final_ln_g);
        out.emplace_back("final_ln.b", final_ln_b);
        out.emplace_back("head.item.w", head_item_w);
        out.emplace_back("head.item.b", head_item_b);
        out.emplace_back("head.x.w", head_x_w);
        out.emplace_back("head.x.b", head_x_b);
        out.emplace_back("head.y.w", head_y_w);
        out.emplace_back("head.y.b", head_y_b);
        return out;
    }

    std::vector<Tens> params() const {
        std::vector<Tens> out;
        for (auto& [name, t] : named_params()) {
            (void)name;
            out.push_back(t);
        }
        return out;
    }

    int64_t param_count() const {
        int64_t n = 0;
        for (const auto& [name, t] : named_params()) {
            (void)name;
            n += t.numel();
        }
        return n;
    }

    /// Per-modality shared-weight embeddings of a batch, before time
    /// embeddings: each of rtg/state/action is [B, K, d]; mask is the learned
    /// substitute for a hidden action, broadcast to the same shape.
    struct ModalityEmbeddings {
        Tens rtg, state, action, mask;
    };

    ModalityEmbeddings embed_modalities(const ModelInput& in) const {
        using namespace num;
        const int B = in.B;
        const int K = in.K;
        const int d = cfg.d_model;
        const int cells = cfg.cells();
        if (K != cfg.context_steps)
            throw DimensionError("forward: window length does not match model context");
        if (static_cast<int>(in.rtg.size()) != B * K ||
            static_cast<int>(in.states.size()) != B * K * cells)
            throw DimensionError("forward: input buffers inconsistent with B,K");

        // Host-built one-hot encodings; constants on the tape.
        std::vector<S> rtg_host(static_cast<size_t>(B) * K);
        for (size_t i = 0; i < rtg_host.size(); ++i) rtg_host[i] = static_cast<S>(in.rtg[i]);
        std::vector<S> state_host(static_cast<size_t>(B) * K * cfg.state_dim(), S(0));
        for (int64_t row = 0; row < static_cast<int64_t>(B) * K; ++row) {
            for (int c = 0; c < cells; ++c) {
                const int code = in.states[static_cast<size_t>(row * cells + c)];
                if (code < 0 || code >= cfg.item_vocab)
                    throw DimensionError("forward: tile code outside vocabulary");
                state_host[static_cast<size_t>(row * cfg.state_dim() + c * cfg.item_vocab + code)] =
                    S(1);
            }
        }
        std::vector<S> act_host(static_cast<size_t>(B) * K * cfg.action_dim(), S(0));
        for (int64_t row = 0; row < static_cast<int64_t>(B) * K; ++row) {
            const int item = in.act_item[static_cast<size_t>(row)];
            const int x = in.act_x[static_cast<size_t>(row)];
            const int y = in.act_y[static_cast<size_t>(row)];
            if (item < 0 || item >= cfg.item_vocab || x < 0 || x >= cfg.width || y < 0 ||
                y >= cfg.height)
                throw DimensionError("forward: action outside vocabulary");
            act_host[static_cast<size_t>(row * cfg.action_dim() + item)] = S(1);
            act_host[static_cast<size_t>(row * cfg.action_dim() + cfg.item_vocab + x)] = S(1);
            act_host[static_cast<size_t>(row * cfg.action_dim() + cfg.item_vocab + cfg.width + y)] =
                S(1);
        }

        Tens rtg_in = Tens::from({B * K, 1}, std::move(rtg_host));
        Tens state_in = Tens::from({B * K, cfg.state_dim()}, std::move(state_host));
        Tens act_in = Tens::from({B * K, cfg.action_dim()}, std::move(act_host));

        ModalityEmbeddings e;
        e.rtg = reshape(add(matmul(rtg_in, rtg_w), rtg_b), {B, K, d});
        e.state = reshape(add(matmul(state_in, state_w), state_b), {B, K, d});
        e.action = reshape(add(matmul(act_in, action_w), action_b), {B, K, d});
        e.mask = add(Tens::zeros({B, K, d}), action_mask_emb);
        return e;
    }

    /// Stack block for one action variant: adds the learned time embedding of
    /// slot_indices[k] to each modality token of slot k, concatenates the
    /// three tokens, projects back to d_model, and layer-normalizes.
    Tens stack_block(const Tens& rtg_e, const Tens& state_e, const Tens& act_slot,
                     const std::vector<int>& slot_indices) const {
        using namespace num;
        const int B = rtg_e.shape()[0];
        const int K = rtg_e.shape()[1];
        const int d = cfg.d_model;
        if (static_cast<int>(slot_indices.size()) != K)
            throw DimensionError("stack_block: one time index per slot required");
        Tens te = embedding_lookup(time_embed, slot_indices);  // [K, d]
        Tens fused = concat<S>({add(rtg_e, te), add(state_e, te), add(act_slot, te)}, 2);
        fused = add(matmul(reshape(fused, {B * K, 3 * d}), stack_w), stack_b);
        return reshape(layer_norm(fused, stack_ln_g, stack_ln_b), {B, K, d});
    }

    ModelOutput<S> forward(const ModelInput& in, bool train, Rng* rng) const {
        using namespace num;
        const int B = in.B;
        const int K = in.K;
        if (train && cfg.dropout > 0.0 && rng == nullptr)
            throw std::invalid_argument("forward: training with dropout requires an rng");

        const ModalityEmbeddings e = embed_modalities(in);
        std::vector<int> slot_idx(static_cast<size_t>(K));
        for (int k = 0; k < K; ++k) slot_idx[static_cast<size_t>(k)] = k;
        Tens ctx = stack_block(e.rtg, e.state, e.action, slot_idx);  // sees recorded actions
        Tens qry = stack_block(e.rtg, e.state, e.mask, slot_idx);    // action slot hidden

        Tens seq = concat<S>({ctx, qry}, 1);  // [B, 2K, d]
        Rng dummy(0);
        Rng& drop_rng = rng ? *rng : dummy;
        seq = num::dropout(seq, cfg.dropout, train, drop_rng);

        const std::vector<uint8_t> mask = build_attention_mask(K);
        for (const Block& blk : blocks) {
            Tens xn = layer_norm(seq, blk.ln1_g, blk.ln1_b);
            Tens q = add(matmul(xn, blk.wq), blk.bq);
            Tens k = add(matmul(xn, blk.wk), blk.bk);
            Tens v = add(matmul(xn, blk.wv), blk.bv);
            Tens attn = attention(q, k, v, cfg.n_heads, mask);
            Tens proj = add(matmul(attn, blk.wo), blk.bo);
            seq = add(seq, num::dropout(proj, cfg.dropout, train, drop_rng));

            Tens x2 = layer_norm(seq, blk.ln2_g, blk.ln2_b);
            Tens ff = add(matmul(gelu(add(matmul(x2, blk.ff_w1), blk.ff_b1)), blk.ff_w2),
                          blk.ff_b2);
            seq = add(seq, num::dropout(ff, cfg.dropout, train, drop_rng));
        }
        seq = layer_norm(seq, final_ln_g, final_ln_b);

        Tens q_out = slice_axis1(seq, K, K);  // query-stream outputs, [B,K,d]
        ModelOutput<S> out;
        out.item_logits = add(matmul(q_out, head_item_w), head_item_b);
        out.x_logits = add(matmul(q_out, head_x_w), head_x_b);
        out.y_logits = add(matmul(q_out, head_y_w), head_y_b);
        return out;
    }

    /// Per supervised slot: NLL(item) + NLL(x) + NLL(y); averaged over each
    /// window's supervised slots, then over the batch.
    num::Tensor<S> loss(const ModelOutput<S>& out, const ModelInput& in) const {
        const int B = in.B;
        const int K = in.K;
        std::vector<double> weights(static_cast<size_t>(B) * K, 0.0);
        for (int b = 0; b < B; ++b) {
            int real = 0;
            for (int k = 0; k < K; ++k) real += in.loss_mask[static_cast<size_t>(b * K + k)];
            if (real == 0)
                throw std::invalid_argument("loss: window with no supervised slots");
            for (int k = 0; k < K; ++k)
                if (in.loss_mask[static_cast<size_t>(b * K + k)])
                    weights[static_cast<size_t>(b * K + k)] = 1.0 / (static_cast<double>(real) * B);
        }
        using namespace num;
        Tens li = cross_entropy_from_logits(out.item_logits, in.act_item, weights);
        Tens lx = cross_entropy_from_logits(out.x_logits, in.act_x, weights);
        Tens ly = cross_entropy_from_logits(out.y_logits, in.act_y, weights);
        return add(add(li, lx), ly);
    }

    void save(const std::string& path) const {
        num::save_checkpoint<S>(path, cfg.to_json(), named_params());
    }

    static PcgptModel load(const std::string& path) {
        const num::Checkpoint ckpt = num::load_checkpoint(path);
        const ModelConfig cfg = ModelConfig::from_json(ckpt.model_config);
        PcgptModel m = PcgptModel::init(cfg, 0);
        for (auto& [name, tensor] : m.named_params()) {
            const num::CheckpointParam& p = ckpt.find(name);
            if (p.shape != tensor.shape())
                throw DimensionError("load: shape mismatch for " + name);
            auto& dst = tensor.value();
            for (size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<S>(p.data[i]);
        }
        return m;
    }
};

}  // namespace pcgpt
