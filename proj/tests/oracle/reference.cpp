#include "reference.hpp"

#include <cmath>
#include <limits>

namespace refimpl {

using nvgan::Grid;

DTensor from_grid(const Grid& g) {
    DTensor t;
    t.shape = g.shape;
    t.data.assign(g.data.begin(), g.data.end());
    return t;
}

DTensor conv2d(const DTensor& x, const DTensor& k, const DTensor& b, int stride, int pad) {
    const int64_t batch = x.shape[0], cin = x.shape[1], h = x.shape[2], w = x.shape[3];
    const int64_t cout = k.shape[0], kh = k.shape[2], kw = k.shape[3];
    const int64_t oh = (h + 2 * pad - kh) / stride + 1;
    const int64_t ow = (w + 2 * pad - kw) / stride + 1;
    DTensor y{{batch, cout, oh, ow},
              std::vector<double>(static_cast<size_t>(batch * cout * oh * ow))};
    for (int64_t n = 0; n < batch; ++n) {
        for (int64_t o = 0; o < cout; ++o) {
            for (int64_t oy = 0; oy < oh; ++oy) {
                for (int64_t ox = 0; ox < ow; ++ox) {
                    double acc = b[o];
                    for (int64_t c = 0; c < cin; ++c) {
                        for (int64_t i = 0; i < kh; ++i) {
                            const int64_t iy = oy * stride + i - pad;
                            if (iy < 0 || iy >= h) continue;
                            for (int64_t j = 0; j < kw; ++j) {
                                const int64_t ix = ox * stride + j - pad;
                                if (ix < 0 || ix >= w) continue;
                                acc += x[((n * cin + c) * h + iy) * w + ix] *
                                       k[((o * cin + c) * kh + i) * kw + j];
                            }
                        }
                    }
                    y[((n * cout + o) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    return y;
}

DTensor conv2d_transpose(const DTensor& x, const DTensor& k, const DTensor& b, int stride,
                         int pad) {
    const int64_t batch = x.shape[0], cin = x.shape[1], h = x.shape[2], w = x.shape[3];
    const int64_t cout = k.shape[1], kh = k.shape[2], kw = k.shape[3];
    const int64_t oh = (h - 1) * stride - 2 * pad + kh;
    const int64_t ow = (w - 1) * stride - 2 * pad + kw;
    DTensor y{{batch, cout, oh, ow},
              std::vector<double>(static_cast<size_t>(batch * cout * oh * ow))};
    for (int64_t n = 0; n < batch; ++n) {
        for (int64_t c = 0; c < cout; ++c) {
            for (int64_t i = 0; i < oh * ow; ++i) y[(n * cout + c) * oh * ow + i] = b[c];
        }
        // scatter-add every input cell through the kernel
        for (int64_t ci = 0; ci < cin; ++ci) {
            for (int64_t iy = 0; iy < h; ++iy) {
                for (int64_t ix = 0; ix < w; ++ix) {
                    const double v = x[((n * cin + ci) * h + iy) * w + ix];
                    for (int64_t co = 0; co < cout; ++co) {
                        for (int64_t i = 0; i < kh; ++i) {
                            const int64_t oy = iy * stride + i - pad;
                            if (oy < 0 || oy >= oh) continue;
                            for (int64_t j = 0; j < kw; ++j) {
                                const int64_t ox = ix * stride + j - pad;
                                if (ox < 0 || ox >= ow) continue;
                                y[((n * cout + co) * oh + oy) * ow + ox] +=
                                    v * k[((ci * cout + co) * kh + i) * kw + j];
                            }
                        }
                    }
                }
            }
        }
    }
    return y;
}

DTensor dense(const DTensor& x, const DTensor& w, const DTensor& b) {
    const int64_t batch = x.shape[0], fin = x.shape[1], fout = w.shape[0];
    DTensor y{{batch, fout}, std::vector<double>(static_cast<size_t>(batch * fout))};
    for (int64_t n = 0; n < batch; ++n) {
        for (int64_t o = 0; o < fout; ++o) {
            double acc = b[o];
            for (int64_t i = 0; i < fin; ++i) acc += x[n * fin + i] * w[o * fin + i];
            y[n * fout + o] = acc;
        }
    }
    return y;
}

namespace {
template <typename F>
DTensor map(const DTensor& x, F f) {
    DTensor y = x;
    for (double& v : y.data) v = f(v);
    return y;
}
}  // namespace

DTensor relu(const DTensor& x) {
    return map(x, [](double v) { return v > 0 ? v : 0.0; });
}
DTensor leaky_relu(const DTensor& x, double slope) {
    return map(x, [slope](double v) { return v > 0 ? v : slope * v; });
}
DTensor tanh_act(const DTensor& x) {
    return map(x, [](double v) { return std::tanh(v); });
}
DTensor sigmoid(const DTensor& x) {
    return map(x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

DTensor global_avg_pool(const DTensor& x) {
    const int64_t planes = x.shape[0] * x.shape[1], plane = x.shape[2] * x.shape[3];
    DTensor y{{x.shape[0], x.shape[1], 1, 1}, std::vector<double>(static_cast<size_t>(planes))};
    for (int64_t p = 0; p < planes; ++p) {
        double acc = 0.0;
        for (int64_t i = 0; i < plane; ++i) acc += x[p * plane + i];
        y[p] = acc / static_cast<double>(plane);
    }
    return y;
}

DTensor concat_channels(const DTensor& a, const DTensor& b) {
    const int64_t batch = a.shape[0], ca = a.shape[1], cb = b.shape[1];
    const int64_t plane = a.shape[2] * a.shape[3];
    DTensor y{{batch, ca + cb, a.shape[2], a.shape[3]},
              std::vector<double>(static_cast<size_t>(batch * (ca + cb) * plane))};
    for (int64_t n = 0; n < batch; ++n) {
        for (int64_t i = 0; i < ca * plane; ++i) {
            y[n * (ca + cb) * plane + i] = a[n * ca * plane + i];
        }
        for (int64_t i = 0; i < cb * plane; ++i) {
            y[(n * (ca + cb) + ca) * plane + i] = b[n * cb * plane + i];
        }
    }
    return y;
}

DTensor batch_norm_train(const DTensor& x, const DTensor& gamma, const DTensor& beta,
                         double eps) {
    const int64_t batch = x.shape[0], channels = x.shape[1], plane = x.shape[2] * x.shape[3];
    const int64_t n = batch * plane;
    DTensor y = x;
    for (int64_t c = 0; c < channels; ++c) {
        double sum = 0.0, sq = 0.0;
        for (int64_t b = 0; b < batch; ++b) {
            for (int64_t i = 0; i < plane; ++i) {
                const double v = x[(b * channels + c) * plane + i];
                sum += v;
                sq += v * v;
            }
        }
        const double mean = sum / static_cast<double>(n);
        double var = sq / static_cast<double>(n) - mean * mean;
        if (var < 0) var = 0;
        const double inv = 1.0 / std::sqrt(var + eps);
        for (int64_t b = 0; b < batch; ++b) {
            for (int64_t i = 0; i < plane; ++i) {
                const int64_t at = (b * channels + c) * plane + i;
                y[at] = gamma[c] * ((x[at] - mean) * inv) + beta[c];
            }
        }
    }
    return y;
}

double bce(const std::vector<double>& pred, int label) {
    double acc = 0.0;
    for (double p : pred) {
        const double q = label == 1 ? p : 1.0 - p;
        acc += std::log(q > 1e-12 ? q : 1e-12);
    }
    return -acc / static_cast<double>(pred.size());
}

double l1_mean(const DTensor& a, const DTensor& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) acc += std::fabs(a.data[i] - b.data[i]);
    return acc / static_cast<double>(a.data.size());
}

DTensor generator_forward(const nvgan::GeneratorNet& g, const DTensor& x) {
    // SE front
    DTensor desc4 = global_avg_pool(x);
    DTensor desc{{x.shape[0], x.shape[1]}, desc4.data};
    DTensor weights;
    if (g.se.single_layer) {
        weights = sigmoid(dense(desc, from_grid(g.se.fc2_weight->value),
                                from_grid(g.se.fc2_bias->value)));
    } else {
        DTensor hidden = relu(dense(desc, from_grid(g.se.fc1_weight->value),
                                    from_grid(g.se.fc1_bias->value)));
        weights = sigmoid(dense(hidden, from_grid(g.se.fc2_weight->value),
                                from_grid(g.se.fc2_bias->value)));
    }
    DTensor h = x;
    const int64_t plane = x.shape[2] * x.shape[3];
    for (int64_t b = 0; b < x.shape[0]; ++b) {
        for (int64_t c = 0; c < x.shape[1]; ++c) {
            for (int64_t i = 0; i < plane; ++i) {
                h[(b * x.shape[1] + c) * plane + i] *= weights[b * x.shape[1] + c];
            }
        }
    }
    // Encoder
    std::vector<DTensor> skips;
    for (size_t i = 0; i < g.encoder.size(); ++i) {
        const auto& level = g.encoder[i];
        h = conv2d(h, from_grid(level.conv.kernel->value), from_grid(level.conv.bias->value),
                   level.conv.stride, level.conv.padding);
        if (level.norm) {
            h = batch_norm_train(h, from_grid(level.norm->gamma->value),
                                 from_grid(level.norm->beta->value), level.norm->eps);
        }
        h = leaky_relu(h, 0.2);
        skips.push_back(h);
    }
    // Decoder (dropout-free reference)
    const int n = g.cfg.depth;
    for (int i = 0; i < n; ++i) {
        const auto& level = g.decoder[static_cast<size_t>(i)];
        h = conv2d_transpose(h, from_grid(level.tconv.kernel->value),
                             from_grid(level.tconv.bias->value), level.tconv.stride,
                             level.tconv.padding);
        if (i == n - 1) {
            h = tanh_act(h);
            break;
        }
        if (level.norm) {
            h = batch_norm_train(h, from_grid(level.norm->gamma->value),
                                 from_grid(level.norm->beta->value), level.norm->eps);
        }
        h = relu(h);
        h = concat_channels(h, skips[static_cast<size_t>(n - 2 - i)]);
    }
    return h;
}

std::vector<double> discriminator_forward(const nvgan::DiscriminatorNet& d, const DTensor& x,
                                          const DTensor& y) {
    DTensor h = concat_channels(x, y);
    for (const auto& conv : d.convs) {
        h = conv2d(h, from_grid(conv.kernel->value), from_grid(conv.bias->value), conv.stride,
                   conv.padding);
        h = leaky_relu(h, 0.2);
    }
    DTensor pooled4 = global_avg_pool(h);
    DTensor pooled{{h.shape[0], h.shape[1]}, pooled4.data};
    DTensor out = sigmoid(
        dense(pooled, from_grid(d.head_weight->value), from_grid(d.head_bias->value)));
    return out.data;
}

double generator_objective(const nvgan::GeneratorNet& g, const nvgan::DiscriminatorNet& d,
                           const DTensor& x, const DTensor& y, double lambda1, double lambda2) {
    const DTensor y_fake = generator_forward(g, x);
    const std::vector<double> d_fake = discriminator_forward(d, x, y_fake);
    return lambda1 * bce(d_fake, 1) + lambda2 * l1_mean(y, y_fake);
}

double discriminator_objective(const std::vector<double>& d_real,
                               const std::vector<double>& d_fake) {
    return bce(d_real, 1) + bce(d_fake, 0);
}

double mae(const Grid& I, const Grid& K) {
    double acc = 0.0;
    for (int64_t i = 0; i < I.size(); ++i) {
        acc += std::fabs(static_cast<double>(I[i]) - static_cast<double>(K[i]));
    }
    return acc / static_cast<double>(I.size());
}

double rmse(const Grid& I, const Grid& K) {
    double acc = 0.0;
    for (int64_t i = 0; i < I.size(); ++i) {
        const double d = static_cast<double>(I[i]) - static_cast<double>(K[i]);
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(I.size()));
}

double psnr(const nvgan::Image& I, const nvgan::Image& K, double max_i) {
    double mse = 0.0;
    for (size_t i = 0; i < I.rgb.size(); ++i) {
        const double d = static_cast<double>(I.rgb[i]) - static_cast<double>(K.rgb[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(I.rgb.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(max_i / std::sqrt(mse));
}

double ssim(const nvgan::Image& I, const nvgan::Image& K, int window, int stride) {
    const double c1 = 0.01 * 255 * 0.01 * 255;
    const double c2 = 0.03 * 255 * 0.03 * 255;
    const double n = static_cast<double>(window) * window;
    double channel_sum = 0.0;
    for (int64_t ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        int64_t count = 0;
        for (int64_t r = 0; r + window <= I.rows; r += stride) {
            for (int64_t c = 0; c + window <= I.cols; c += stride) {
                double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
                for (int64_t i = 0; i < window; ++i) {
                    for (int64_t j = 0; j < window; ++j) {
                        const double x = I.at(r + i, c + j, ch);
                        const double y = K.at(r + i, c + j, ch);
                        sx += x;
                        sy += y;
                        sxx += x * x;
                        syy += y * y;
                        sxy += x * y;
                    }
                }
                const double mx = sx / n, my = sy / n;
                const double vx = sxx / n - mx * mx;
                const double vy = syy / n - my * my;
                const double cov = sxy / n - mx * my;
                acc += ((2 * mx * my + c1) * (2 * cov + c2)) /
                       ((mx * mx + my * my + c1) * (vx + vy + c2));
                ++count;
            }
        }
        channel_sum += acc / static_cast<double>(count);
    }
    return channel_sum / 3.0;
}

}  // namespace refimpl
