// SPDX-License-Identifier: Apache-2.0
#include "dni/synthetic_models.hpp"

#include <stdexcept>

namespace dni {

namespace {

Tensor with_conditioning(const SgModel& model, const Tensor& h,
                         const std::vector<std::size_t>* labels) {
    if (model.cfg.conditioning == Conditioning::none) {
        if (labels != nullptr) {
            throw std::invalid_argument("sg_predict: unconditional model given labels");
        }
        return h;
    }
    if (labels == nullptr) {
        throw std::invalid_argument("sg_predict: conditional model needs labels");
    }
    if (labels->size() != h.rows()) {
        throw std::invalid_argument("sg_predict: label count does not match batch");
    }
    return concat_cols(h, one_hot(*labels, model.cfg.num_classes));
}

struct StackCaches {
    std::vector<LinearCache> lin;
    std::vector<BnCache> bn;
    std::vector<ReluCache> relu;
    LinearCache out;
};

Tensor stack_forward(SgModel& model, const Tensor& input, StackCaches& caches) {
    const std::size_t k = model.cfg.hidden_layers;
    caches.lin.resize(k);
    caches.bn.resize(k);
    caches.relu.resize(k);
    Tensor a = input;
    for (std::size_t l = 0; l < k; ++l) {
        a = linear_forward(model.hidden[l], a, caches.lin[l]);
        a = batchnorm_forward(model.norms[l], a, BnMode::train, caches.bn[l]);
        a = relu_forward(a, caches.relu[l]);
    }
    return linear_forward(model.out, a, caches.out);
}

}  // namespace

SgModel SgModel::create(const SgModelConfig& cfg, RngState& rng) {
    if (cfg.hidden_layers > 2) {
        throw std::invalid_argument("SgModel: hidden_layers must be 0, 1 or 2");
    }
    if (cfg.conditioning == Conditioning::label_one_hot && cfg.num_classes == 0) {
        throw std::invalid_argument("SgModel: conditional model needs num_classes");
    }
    SgModel model;
    model.cfg = cfg;
    const std::size_t extra = cfg.conditioning == Conditioning::label_one_hot ? cfg.num_classes : 0;
    std::size_t in = cfg.input_dim + extra;
    for (std::size_t l = 0; l < cfg.hidden_layers; ++l) {
        model.hidden.push_back(LinearLayer::create(in, cfg.hidden_width, rng, cfg.adam));
        model.norms.push_back(BatchNormLayer::create(cfg.hidden_width, cfg.adam));
        in = cfg.hidden_width;
    }
    model.out = LinearLayer::zeros(in, cfg.output_dim, cfg.adam);
    return model;
}

Tensor sg_predict(SgModel& model, const Tensor& h, const std::vector<std::size_t>* labels) {
    StackCaches caches;
    const Tensor input = with_conditioning(model, h, labels);
    return stack_forward(model, input, caches);
}

double sg_update(SgModel& model, const Tensor& h, const std::vector<std::size_t>* labels,
                 const Tensor& target, Tensor* dh_out) {
    StackCaches caches;
    const Tensor input = with_conditioning(model, h, labels);
    const Tensor pred = stack_forward(model, input, caches);
    Tensor dpred;
    const double loss = l2_loss(pred, target, dpred);

    const std::size_t k = model.cfg.hidden_layers;
    LinearGrads out_g = linear_backward(model.out, caches.out, dpred);
    Tensor da = out_g.dx;
    std::vector<LinearGrads> lin_g(k);
    std::vector<BnGrads> bn_g(k);
    for (std::size_t l = k; l-- > 0;) {
        da = relu_backward(caches.relu[l], da);
        bn_g[l] = batchnorm_backward(model.norms[l], caches.bn[l], da);
        lin_g[l] = linear_backward(model.hidden[l], caches.lin[l], bn_g[l].dx);
        da = lin_g[l].dx;
    }
    if (dh_out != nullptr) {
        *dh_out = model.cfg.conditioning == Conditioning::none
                      ? da
                      : slice_cols(da, 0, model.cfg.input_dim);
    }

    linear_apply(model.out, out_g);
    for (std::size_t l = 0; l < k; ++l) {
        linear_apply(model.hidden[l], lin_g[l]);
        batchnorm_apply(model.norms[l], bn_g[l]);
    }
    return loss;
}

Tensor synth_input_predict(SyntheticInputModel& model, const Tensor& x,
                           const std::vector<std::size_t>* labels) {
    return sg_predict(model, x, labels);
}

double synth_input_update(SyntheticInputModel& model, const Tensor& x,
                          const std::vector<std::size_t>* labels, const Tensor& target,
                          Tensor* dx_out) {
    return sg_update(model, x, labels, target, dx_out);
}

}  // namespace dni
