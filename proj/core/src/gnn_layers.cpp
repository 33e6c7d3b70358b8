#include <stdexcept>

#include "fcgnn/gnn.hpp"

namespace fcgnn {

namespace {

ParamId add_weight(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  return store.add(name, glorot_init(in, out, rng));
}

ParamId add_bias(ParamStore& store, const std::string& name, std::size_t out) {
  return store.add(name, Tensor2(1, out, 0.0));
}

}  // namespace

// --- GCN -------------------------------------------------------------------

GcnLayer GcnLayer::create(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                          bool activate, Rng& rng) {
  GcnLayer layer;
  layer.weight = add_weight(store, prefix + ".weight", in, out, rng);
  layer.bias = add_bias(store, prefix + ".bias", out);
  layer.activate = activate;
  return layer;
}

Tensor2 GcnLayer::forward(const ParamStore& store, const SparseOperator& adj, const Tensor2& h,
                          Cache& cache) const {
  cache.aggregated = adj.apply(h);
  cache.pre_activation = affine_forward(cache.aggregated, store[weight], store[bias]);
  return activate ? relu_forward(cache.pre_activation) : cache.pre_activation;
}

Tensor2 GcnLayer::backward(ParamStore& store, const SparseOperator& adj, const Cache& cache,
                           const Tensor2& dout) const {
  const Tensor2 dz = activate ? relu_backward(cache.pre_activation, dout) : dout;
  const Tensor2 dagg = affine_backward(cache.aggregated, dz, store[weight], store[bias]);
  return adj.apply_transpose(dagg);
}

// --- GraphSAGE ---------------------------------------------------------------

SageLayer SageLayer::create(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                            bool batch_norm, bool activate, Rng& rng) {
  SageLayer layer;
  layer.weight_self = add_weight(store, prefix + ".weight_self", in, out, rng);
  layer.weight_neigh = add_weight(store, prefix + ".weight_neigh", in, out, rng);
  layer.bias = add_bias(store, prefix + ".bias", out);
  layer.batch_norm = batch_norm;
  if (batch_norm) {
    layer.bn_gamma = store.add(prefix + ".bn_gamma", Tensor2(1, out, 1.0));
    layer.bn_beta = store.add(prefix + ".bn_beta", Tensor2(1, out, 0.0));
  }
  layer.activate = activate;
  return layer;
}

Tensor2 SageLayer::forward(const ParamStore& store, const SparseOperator& mean_adj, const Tensor2& h,
                           bool training, const BatchNormState& bn_state, BatchNormState* bn_update,
                           Cache& cache) const {
  cache.input = h;
  cache.neighbor_mean = mean_adj.apply(h);
  cache.pre_norm = affine_forward(h, store[weight_self], store[bias]);
  gemm_accumulate(cache.neighbor_mean, store[weight_neigh].value, cache.pre_norm);
  if (batch_norm) {
    BatchNormState scratch = bn_state;
    BatchNormState& target = bn_update != nullptr ? *bn_update : scratch;
    cache.pre_activation = batch_norm_forward(cache.pre_norm, store[bn_gamma], store[bn_beta], training, target,
                                              cache.bn, bn_update != nullptr);
  } else {
    cache.pre_activation = cache.pre_norm;
  }
  return activate ? relu_forward(cache.pre_activation) : cache.pre_activation;
}

Tensor2 SageLayer::backward(ParamStore& store, const SparseOperator& mean_adj, const Cache& cache,
                            const Tensor2& dout) const {
  Tensor2 dz = activate ? relu_backward(cache.pre_activation, dout) : dout;
  if (batch_norm) dz = batch_norm_backward(cache.bn, dz, store[bn_gamma], store[bn_beta]);
  Tensor2 dh = affine_backward(cache.input, dz, store[weight_self], store[bias]);
  Param& wn = store[weight_neigh];
  gemm_accumulate(transpose(cache.neighbor_mean), dz, wn.grad);
  const Tensor2 dmean = matmul_nt(dz, wn.value);
  add_inplace(dh, mean_adj.apply_transpose(dmean));
  return dh;
}

// --- GIN -------------------------------------------------------------------

GinLayer GinLayer::create(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                          bool activate, Rng& rng) {
  GinLayer layer;
  layer.eps = store.add(prefix + ".eps", Tensor2(1, 1, 0.0));
  layer.weight1 = add_weight(store, prefix + ".mlp1.weight", in, out, rng);
  layer.bias1 = add_bias(store, prefix + ".mlp1.bias", out);
  layer.bn_gamma = store.add(prefix + ".bn_gamma", Tensor2(1, out, 1.0));
  layer.bn_beta = store.add(prefix + ".bn_beta", Tensor2(1, out, 0.0));
  layer.weight2 = add_weight(store, prefix + ".mlp2.weight", out, out, rng);
  layer.bias2 = add_bias(store, prefix + ".mlp2.bias", out);
  layer.activate = activate;
  return layer;
}

Tensor2 GinLayer::forward(const ParamStore& store, const SparseOperator& sum_adj, const Tensor2& h,
                          bool training, const BatchNormState& bn_state, BatchNormState* bn_update,
                          Cache& cache) const {
  cache.input = h;
  cache.combined = sum_adj.apply(h);
  const double self_scale = 1.0 + store[eps].value(0, 0);
  auto hv = h.values();
  auto cv = cache.combined.values();
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] = self_scale * hv[i] + cv[i];
  cache.hidden_pre = affine_forward(cache.combined, store[weight1], store[bias1]);
  BatchNormState scratch = bn_state;
  BatchNormState& target = bn_update != nullptr ? *bn_update : scratch;
  cache.hidden_norm = batch_norm_forward(cache.hidden_pre, store[bn_gamma], store[bn_beta], training, target,
                                         cache.bn, bn_update != nullptr);
  cache.hidden = relu_forward(cache.hidden_norm);
  cache.pre_activation = affine_forward(cache.hidden, store[weight2], store[bias2]);
  return activate ? relu_forward(cache.pre_activation) : cache.pre_activation;
}

Tensor2 GinLayer::backward(ParamStore& store, const SparseOperator& sum_adj, const Cache& cache,
                           const Tensor2& dout) const {
  const Tensor2 dz2 = activate ? relu_backward(cache.pre_activation, dout) : dout;
  const Tensor2 dhidden = affine_backward(cache.hidden, dz2, store[weight2], store[bias2]);
  const Tensor2 dz1 = batch_norm_backward(cache.bn, relu_backward(cache.hidden_norm, dhidden), store[bn_gamma],
                                          store[bn_beta]);
  const Tensor2 dcombined = affine_backward(cache.combined, dz1, store[weight1], store[bias1]);

  Param& e = store[eps];
  double deps = 0.0;
  auto hv = cache.input.values();
  auto dv = dcombined.values();
  for (std::size_t i = 0; i < dv.size(); ++i) deps += hv[i] * dv[i];
  e.grad(0, 0) += deps;

  Tensor2 dh = sum_adj.apply_transpose(dcombined);
  const double self_scale = 1.0 + e.value(0, 0);
  auto out = dh.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += self_scale * dv[i];
  return dh;
}

// --- SGC -------------------------------------------------------------------

SgcHead SgcHead::create(ParamStore& store, std::size_t in, std::size_t classes, std::size_t hops, Rng& rng) {
  SgcHead head;
  head.weight = add_weight(store, "sgc.weight", in, classes, rng);
  head.bias = add_bias(store, "sgc.bias", classes);
  head.hops = hops;
  return head;
}

Tensor2 SgcHead::propagate(const SparseOperator& adj, const Tensor2& x) const {
  Tensor2 h = x;
  for (std::size_t k = 0; k < hops; ++k) h = adj.apply(h);
  return h;
}

}  // namespace fcgnn
