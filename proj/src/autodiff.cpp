#include "autodiff.h"

#include "error.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace salf::ad {

namespace {

int64_t shape_size(const std::vector<int64_t> & shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        n *= d;
    }
    return n;
}

void check_shape(const tensor_ptr & t, size_t rank, const char * what) {
    check(t != nullptr, errc::invalid_argument, std::string(what) + ": null tensor");
    check(t->shape.size() == rank, errc::shape_mismatch,
          std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
              std::to_string(t->shape.size()));
    for (int64_t d : t->shape) {
        check(d >= 1, errc::shape_mismatch, std::string(what) + ": zero-sized dimension");
    }
}

} // namespace

tensor_ptr tensor::zeros(std::vector<int64_t> shape, bool requires_grad) {
    auto t = std::make_shared<tensor>();
    t->shape = std::move(shape);
    t->data.assign(static_cast<size_t>(shape_size(t->shape)), 0.0);
    t->requires_grad = requires_grad;
    if (requires_grad) {
        t->grad.assign(t->data.size(), 0.0);
    }
    return t;
}

tensor_ptr tensor::from(std::vector<int64_t> shape, std::vector<double> values, bool requires_grad) {
    check(static_cast<int64_t>(values.size()) == shape_size(shape), errc::shape_mismatch,
          "tensor::from: value count does not match shape");
    auto t = tensor::zeros(std::move(shape), requires_grad);
    t->data = std::move(values);
    return t;
}

tensor_ptr tape::make_result(std::vector<int64_t> shape, bool requires_grad) {
    return tensor::zeros(std::move(shape), requires_grad);
}

tensor_ptr tape::conv1d_k3(const tensor_ptr & x, const tensor_ptr & w, const tensor_ptr & b) {
    check_shape(x, 3, "conv1d input");
    check_shape(w, 3, "conv1d weight");
    check_shape(b, 1, "conv1d bias");
    const int64_t batch = x->dim(0), c_in = x->dim(1), len = x->dim(2);
    const int64_t c_out = w->dim(0);
    check(w->dim(1) == c_in, errc::shape_mismatch, "conv1d: weight in-channels != input channels");
    check(w->dim(2) == 3, errc::shape_mismatch, "conv1d: kernel size must be 3");
    check(b->dim(0) == c_out, errc::shape_mismatch, "conv1d: bias size != out channels");

    auto out = make_result({ batch, c_out, len }, x->requires_grad || w->requires_grad || b->requires_grad);

    auto x_at = [&](int64_t n, int64_t c, int64_t l) -> double {
        if (l < 0 || l >= len) {
            return 0.0; // zero padding
        }
        return x->data[(n * c_in + c) * len + l];
    };
    for (int64_t n = 0; n < batch; ++n) {
        for (int64_t co = 0; co < c_out; ++co) {
            for (int64_t l = 0; l < len; ++l) {
                double acc = b->data[co];
                for (int64_t ci = 0; ci < c_in; ++ci) {
                    const double * wk = &w->data[(co * c_in + ci) * 3];
                    acc += wk[0] * x_at(n, ci, l - 1) + wk[1] * x_at(n, ci, l) + wk[2] * x_at(n, ci, l + 1);
                }
                out->data[(n * c_out + co) * len + l] = acc;
            }
        }
    }

    if (out->requires_grad) {
        std::vector<double> x_saved = x->data;
        std::vector<double> w_saved = w->data;
        record([=]() {
            auto xs_at = [&](int64_t n, int64_t c, int64_t l) -> double {
                if (l < 0 || l >= len) {
                    return 0.0;
                }
                return x_saved[(n * c_in + c) * len + l];
            };
            for (int64_t n = 0; n < batch; ++n) {
                for (int64_t co = 0; co < c_out; ++co) {
                    for (int64_t l = 0; l < len; ++l) {
                        const double g = out->grad[(n * c_out + co) * len + l];
                        if (g == 0.0) {
                            continue;
                        }
                        if (b->requires_grad) {
                            b->grad[co] += g;
                        }
                        for (int64_t ci = 0; ci < c_in; ++ci) {
                            const size_t wbase = (co * c_in + ci) * 3;
                            for (int64_t t = 0; t < 3; ++t) {
                                const int64_t xi = l + t - 1;
                                if (w->requires_grad) {
                                    w->grad[wbase + t] += g * xs_at(n, ci, xi);
                                }
                                if (x->requires_grad && xi >= 0 && xi < len) {
                                    x->grad[(n * c_in + ci) * len + xi] += g * w_saved[wbase + t];
                                }
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

tensor_ptr tape::batchnorm1d(const tensor_ptr & x, const tensor_ptr & gamma, const tensor_ptr & beta,
                             bn_state & state, bool training) {
    check_shape(x, 3, "batchnorm input");
    check_shape(gamma, 1, "batchnorm gamma");
    check_shape(beta, 1, "batchnorm beta");
    const int64_t batch = x->dim(0), channels = x->dim(1), len = x->dim(2);
    check(gamma->dim(0) == channels && beta->dim(0) == channels, errc::shape_mismatch,
          "batchnorm: gamma/beta size != channels");
    check(state.channels() == channels, errc::shape_mismatch, "batchnorm: running stats size != channels");

    const int64_t n_per_channel = batch * len;
    if (training && n_per_channel < 2) {
        fail(errc::degenerate_batch, "batchnorm training needs batch*length >= 2 per channel");
    }

    auto out = make_result({ batch, channels, len },
                           x->requires_grad || gamma->requires_grad || beta->requires_grad);

    std::vector<double> mean(channels), inv_std(channels);
    std::vector<double> x_hat(x->data.size());

    for (int64_t c = 0; c < channels; ++c) {
        double mu, var;
        if (training) {
            mu = 0.0;
            for (int64_t n = 0; n < batch; ++n) {
                for (int64_t l = 0; l < len; ++l) {
                    mu += x->data[(n * channels + c) * len + l];
                }
            }
            mu /= n_per_channel;
            var = 0.0;
            for (int64_t n = 0; n < batch; ++n) {
                for (int64_t l = 0; l < len; ++l) {
                    const double d = x->data[(n * channels + c) * len + l] - mu;
                    var += d * d;
                }
            }
            var /= n_per_channel; // biased
            state.running_mean[c] = (1.0 - bn_momentum) * state.running_mean[c] + bn_momentum * mu;
            const double unbiased = var * n_per_channel / (n_per_channel - 1);
            state.running_var[c] = (1.0 - bn_momentum) * state.running_var[c] + bn_momentum * unbiased;
        } else {
            mu = state.running_mean[c];
            var = state.running_var[c];
        }
        mean[c] = mu;
        inv_std[c] = 1.0 / std::sqrt(var + bn_epsilon);
        for (int64_t n = 0; n < batch; ++n) {
            for (int64_t l = 0; l < len; ++l) {
                const size_t i = (n * channels + c) * len + l;
                x_hat[i] = (x->data[i] - mu) * inv_std[c];
                out->data[i] = gamma->data[c] * x_hat[i] + beta->data[c];
            }
        }
    }

    if (out->requires_grad) {
        std::vector<double> gamma_saved = gamma->data;
        record([=, x_hat = std::move(x_hat), inv_std = std::move(inv_std)]() {
            for (int64_t c = 0; c < channels; ++c) {
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (int64_t n = 0; n < batch; ++n) {
                    for (int64_t l = 0; l < len; ++l) {
                        const size_t i = (n * channels + c) * len + l;
                        sum_dy += out->grad[i];
                        sum_dy_xhat += out->grad[i] * x_hat[i];
                    }
                }
                if (gamma->requires_grad) {
                    gamma->grad[c] += sum_dy_xhat;
                }
                if (beta->requires_grad) {
                    beta->grad[c] += sum_dy;
                }
                if (!x->requires_grad) {
                    continue;
                }
                if (training) {
                    const double inv_n = 1.0 / static_cast<double>(n_per_channel);
                    for (int64_t n = 0; n < batch; ++n) {
                        for (int64_t l = 0; l < len; ++l) {
                            const size_t i = (n * channels + c) * len + l;
                            x->grad[i] += gamma_saved[c] * inv_std[c] *
                                          (out->grad[i] - inv_n * sum_dy - x_hat[i] * inv_n * sum_dy_xhat);
                        }
                    }
                } else {
                    for (int64_t n = 0; n < batch; ++n) {
                        for (int64_t l = 0; l < len; ++l) {
                            const size_t i = (n * channels + c) * len + l;
                            x->grad[i] += gamma_saved[c] * inv_std[c] * out->grad[i];
                        }
                    }
                }
            }
        });
    }
    return out;
}

tensor_ptr tape::relu(const tensor_ptr & x) {
    check(x != nullptr, errc::invalid_argument, "relu: null tensor");
    auto out = make_result(x->shape, x->requires_grad);
    for (size_t i = 0; i < x->data.size(); ++i) {
        out->data[i] = std::max(0.0, x->data[i]);
    }
    if (out->requires_grad) {
        std::vector<double> x_saved = x->data;
        record([=, x_saved = std::move(x_saved)]() {
            for (size_t i = 0; i < x_saved.size(); ++i) {
                if (x_saved[i] > 0.0) { // subgradient 0 at the kink
                    x->grad[i] += out->grad[i];
                }
            }
        });
    }
    return out;
}

tensor_ptr tape::maxpool1d_k2s2(const tensor_ptr & x) {
    check_shape(x, 3, "maxpool input");
    const int64_t batch = x->dim(0), channels = x->dim(1), len = x->dim(2);
    if (len % 2 != 0) {
        fail(errc::odd_length, "maxpool1d: length " + std::to_string(len) + " is odd");
    }
    const int64_t out_len = len / 2;
    auto out = make_result({ batch, channels, out_len }, x->requires_grad);

    std::vector<size_t> argmax(out->data.size());
    for (int64_t n = 0; n < batch; ++n) {
        for (int64_t c = 0; c < channels; ++c) {
            for (int64_t l = 0; l < out_len; ++l) {
                const size_t i0 = (n * channels + c) * len + 2 * l;
                const size_t o = (n * channels + c) * out_len + l;
                // ties break to the first element
                if (x->data[i0] >= x->data[i0 + 1]) {
                    out->data[o] = x->data[i0];
                    argmax[o] = i0;
                } else {
                    out->data[o] = x->data[i0 + 1];
                    argmax[o] = i0 + 1;
                }
            }
        }
    }
    if (out->requires_grad) {
        record([=, argmax = std::move(argmax)]() {
            for (size_t o = 0; o < argmax.size(); ++o) {
                x->grad[argmax[o]] += out->grad[o];
            }
        });
    }
    return out;
}

tensor_ptr tape::avgpool1d_k2s2(const tensor_ptr & x) {
    check_shape(x, 3, "avgpool input");
    const int64_t batch = x->dim(0), channels = x->dim(1), len = x->dim(2);
    if (len % 2 != 0) {
        fail(errc::odd_length, "avgpool1d: length " + std::to_string(len) + " is odd");
    }
    const int64_t out_len = len / 2;
    auto out = make_result({ batch, channels, out_len }, x->requires_grad);
    for (size_t o = 0, i = 0; o < out->data.size(); ++o, i += 2) {
        out->data[o] = 0.5 * (x->data[i] + x->data[i + 1]);
    }
    if (out->requires_grad) {
        record([=]() {
            for (size_t o = 0, i = 0; o < out->data.size(); ++o, i += 2) {
                x->grad[i] += 0.5 * out->grad[o];
                x->grad[i + 1] += 0.5 * out->grad[o];
            }
        });
    }
    return out;
}

tensor_ptr tape::linear(const tensor_ptr & x, const tensor_ptr & w, const tensor_ptr & b) {
    check_shape(x, 2, "linear input");
    check_shape(w, 2, "linear weight");
    check_shape(b, 1, "linear bias");
    const int64_t batch = x->dim(0), features = x->dim(1);
    const int64_t out_features = w->dim(0);
    check(w->dim(1) == features, errc::shape_mismatch,
          "linear: weight expects " + std::to_string(w->dim(1)) + " features, input has " +
              std::to_string(features));
    check(b->dim(0) == out_features, errc::shape_mismatch, "linear: bias size != out features");

    auto out = make_result({ batch, out_features },
                           x->requires_grad || w->requires_grad || b->requires_grad);
    for (int64_t n = 0; n < batch; ++n) {
        for (int64_t o = 0; o < out_features; ++o) {
            double acc = b->data[o];
            const double * wr = &w->data[o * features];
            const double * xr = &x->data[n * features];
            for (int64_t f = 0; f < features; ++f) {
                acc += wr[f] * xr[f];
            }
            out->data[n * out_features + o] = acc;
        }
    }
    if (out->requires_grad) {
        std::vector<double> x_saved = x->data;
        std::vector<double> w_saved = w->data;
        record([=]() {
            for (int64_t n = 0; n < batch; ++n) {
                for (int64_t o = 0; o < out_features; ++o) {
                    const double g = out->grad[n * out_features + o];
                    if (g == 0.0) {
                        continue;
                    }
                    if (b->requires_grad) {
                        b->grad[o] += g;
                    }
                    for (int64_t f = 0; f < features; ++f) {
                        if (w->requires_grad) {
                            w->grad[o * features + f] += g * x_saved[n * features + f];
                        }
                        if (x->requires_grad) {
                            x->grad[n * features + f] += g * w_saved[o * features + f];
                        }
                    }
                }
            }
        });
    }
    return out;
}

tensor_ptr tape::flatten(const tensor_ptr & x) {
    check_shape(x, 3, "flatten input");
    auto out = make_result({ x->dim(0), x->dim(1) * x->dim(2) }, x->requires_grad);
    out->data = x->data;
    if (out->requires_grad) {
        record([=]() {
            for (size_t i = 0; i < x->grad.size(); ++i) {
                x->grad[i] += out->grad[i];
            }
        });
    }
    return out;
}

tensor_ptr tape::concat_cols(const std::vector<tensor_ptr> & parts) {
    check(!parts.empty(), errc::invalid_argument, "concat: no inputs");
    const int64_t batch = parts[0]->dim(0);
    int64_t total = 0;
    bool needs_grad = false;
    for (const auto & p : parts) {
        check_shape(p, 2, "concat input");
        check(p->dim(0) == batch, errc::shape_mismatch, "concat: batch sizes differ");
        total += p->dim(1);
        needs_grad = needs_grad || p->requires_grad;
    }
    auto out = make_result({ batch, total }, needs_grad);
    int64_t offset = 0;
    for (const auto & p : parts) {
        const int64_t f = p->dim(1);
        for (int64_t n = 0; n < batch; ++n) {
            std::copy_n(&p->data[n * f], f, &out->data[n * total + offset]);
        }
        offset += f;
    }
    if (needs_grad) {
        record([=]() {
            int64_t off = 0;
            for (const auto & p : parts) {
                const int64_t f = p->dim(1);
                if (p->requires_grad) {
                    for (int64_t n = 0; n < batch; ++n) {
                        for (int64_t i = 0; i < f; ++i) {
                            p->grad[n * f + i] += out->grad[n * total + off + i];
                        }
                    }
                }
                off += f;
            }
        });
    }
    return out;
}

tensor_ptr tape::add(const tensor_ptr & a, const tensor_ptr & b) {
    check(a != nullptr && b != nullptr, errc::invalid_argument, "add: null tensor");
    check(a->shape == b->shape, errc::shape_mismatch, "add: shapes differ");
    auto out = make_result(a->shape, a->requires_grad || b->requires_grad);
    for (size_t i = 0; i < a->data.size(); ++i) {
        out->data[i] = a->data[i] + b->data[i];
    }
    if (out->requires_grad) {
        record([=]() {
            for (size_t i = 0; i < out->grad.size(); ++i) {
                if (a->requires_grad) {
                    a->grad[i] += out->grad[i];
                }
                if (b->requires_grad) {
                    b->grad[i] += out->grad[i];
                }
            }
        });
    }
    return out;
}

tensor_ptr tape::sum(const tensor_ptr & x) {
    check(x != nullptr, errc::invalid_argument, "sum: null tensor");
    auto out = make_result({ 1 }, x->requires_grad);
    out->data[0] = std::accumulate(x->data.begin(), x->data.end(), 0.0);
    if (out->requires_grad) {
        record([=]() {
            for (auto & g : x->grad) {
                g += out->grad[0];
            }
        });
    }
    return out;
}

tensor_ptr tape::l1_loss(const tensor_ptr & pred, const tensor_ptr & target) {
    check(pred != nullptr && target != nullptr, errc::invalid_argument, "l1_loss: null tensor");
    check(pred->shape == target->shape, errc::shape_mismatch, "l1_loss: shapes differ");
    const auto n = static_cast<double>(pred->data.size());
    auto out = make_result({ 1 }, pred->requires_grad || target->requires_grad);
    double acc = 0.0;
    for (size_t i = 0; i < pred->data.size(); ++i) {
        acc += std::abs(pred->data[i] - target->data[i]);
    }
    out->data[0] = acc / n;
    if (out->requires_grad) {
        std::vector<double> diff(pred->data.size());
        for (size_t i = 0; i < diff.size(); ++i) {
            diff[i] = pred->data[i] - target->data[i];
        }
        record([=, diff = std::move(diff)]() {
            const double g = out->grad[0] / n;
            for (size_t i = 0; i < diff.size(); ++i) {
                const double s = diff[i] > 0.0 ? 1.0 : (diff[i] < 0.0 ? -1.0 : 0.0);
                if (pred->requires_grad) {
                    pred->grad[i] += g * s;
                }
                if (target->requires_grad) {
                    target->grad[i] -= g * s;
                }
            }
        });
    }
    return out;
}

void tape::backward(const tensor_ptr & loss) {
    check(loss != nullptr, errc::invalid_argument, "backward: null loss");
    if (loss->size() != 1) {
        fail(errc::not_scalar, "backward requires a scalar loss, got " + std::to_string(loss->size()) +
                                   " elements");
    }
    if (!loss->requires_grad) {
        return; // nothing on the tape feeds this value
    }
    loss->grad[0] += 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
        (*it)();
    }
}

} // namespace salf::ad
