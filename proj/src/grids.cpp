#include "vbdeblur/grids.hpp"

#include "vbdeblur/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vbd::grids {

namespace {

std::string shape_str(Shape s) {
    return std::to_string(s.width) + "x" + std::to_string(s.height);
}

void require_valid(Shape image, Shape kernel) {
    if (kernel.width < 1 || kernel.height < 1)
        throw DimensionError("empty kernel " + shape_str(kernel));
    if (image.width < kernel.width || image.height < kernel.height)
        throw DimensionError("image " + shape_str(image) + " smaller than kernel " +
                             shape_str(kernel));
}

}  // namespace

Image::Image(Shape s, Vec v) : shape(s), values(std::move(v)) {
    if (values.size() != s.size())
        throw DimensionError("value count " + std::to_string(values.size()) +
                             " does not match shape " + shape_str(s));
}

Kernel Kernel::delta(Shape s) {
    Kernel k(s);
    k.at(s.height / 2, s.width / 2) = 1.0;
    return k;
}

Kernel Kernel::uniform(Shape s) {
    Kernel k(s);
    k.values.setConstant(1.0 / static_cast<double>(s.size()));
    return k;
}

void Kernel::validate() const {
    for (Index i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]) || values[i] < 0.0)
            throw InvalidArgument("kernel tap " + std::to_string(i) + " is negative or non-finite");
    }
}

void Kernel::normalize() {
    const double s = sum();
    if (!(s > 0.0) || !std::isfinite(s))
        throw InvalidArgument("kernel sum must be positive to normalize");
    values /= s;
}

bool Kernel::is_normalized(double tol) const {
    return (values.array() >= 0.0).all() && std::abs(sum() - 1.0) <= tol;
}

Shape valid_shape(Shape image, Shape kernel) {
    require_valid(image, kernel);
    return {image.width - kernel.width + 1, image.height - kernel.height + 1};
}

Shape latent_shape(Shape observation, Shape kernel) {
    return {observation.width + kernel.width - 1, observation.height + kernel.height - 1};
}

BlurredImage convolve_valid(const Image& x, const Kernel& k) {
    const Shape out = valid_shape(x.shape, k.shape);
    BlurredImage y(out);
    const Index P = k.width(), Q = k.height(), M = x.width();
    for (Index a = 0; a < Q; ++a) {
        for (Index b = 0; b < P; ++b) {
            const double kv = k.at(a, b);
            if (kv == 0.0) continue;
            const Index dr = Q - 1 - a, dc = P - 1 - b;
            for (Index r = 0; r < out.height; ++r) {
                const double* src = x.values.data() + (r + dr) * M + dc;
                double* dst = y.values.data() + r * out.width;
                for (Index c = 0; c < out.width; ++c) dst[c] += kv * src[c];
            }
        }
    }
    return y;
}

GradientImage conv_adjoint(const Image& y, const Kernel& k, Shape latent) {
    const Shape expected = valid_shape(latent, k.shape);
    if (!(expected == y.shape))
        throw DimensionError("observation " + shape_str(y.shape) + " inconsistent with latent " +
                             shape_str(latent) + " and kernel " + shape_str(k.shape));
    GradientImage x(latent);
    const Index P = k.width(), Q = k.height(), M = latent.width;
    for (Index a = 0; a < Q; ++a) {
        for (Index b = 0; b < P; ++b) {
            const double kv = k.at(a, b);
            if (kv == 0.0) continue;
            const Index dr = Q - 1 - a, dc = P - 1 - b;
            for (Index r = 0; r < y.height(); ++r) {
                const double* src = y.values.data() + r * y.width();
                double* dst = x.values.data() + (r + dr) * M + dc;
                for (Index c = 0; c < y.width(); ++c) dst[c] += kv * src[c];
            }
        }
    }
    return x;
}

Vec image_adjoint(const Image& x, const Image& y, Shape kernel) {
    const Shape expected = valid_shape(x.shape, kernel);
    if (!(expected == y.shape))
        throw DimensionError("observation " + shape_str(y.shape) + " inconsistent with latent " +
                             shape_str(x.shape));
    const Index P = kernel.width, Q = kernel.height, M = x.width();
    Vec out = Vec::Zero(kernel.size());
    for (Index a = 0; a < Q; ++a) {
        for (Index b = 0; b < P; ++b) {
            const Index dr = Q - 1 - a, dc = P - 1 - b;
            double acc = 0.0;
            for (Index r = 0; r < y.height(); ++r) {
                const double* xs = x.values.data() + (r + dr) * M + dc;
                const double* ys = y.values.data() + r * y.width();
                for (Index c = 0; c < y.width(); ++c) acc += xs[c] * ys[c];
            }
            out[a * P + b] = acc;
        }
    }
    return out;
}

Eigen::MatrixXd image_gram(const Image& x, Shape kernel) {
    const Shape out = valid_shape(x.shape, kernel);
    const Index P = kernel.width, Q = kernel.height, M = x.width();
    const Index l = kernel.size();
    Eigen::MatrixXd G(l, l);
    for (Index j = 0; j < l; ++j) {
        const Index drj = Q - 1 - j / P, dcj = P - 1 - j % P;
        for (Index i = j; i < l; ++i) {
            const Index dri = Q - 1 - i / P, dci = P - 1 - i % P;
            double acc = 0.0;
            for (Index r = 0; r < out.height; ++r) {
                const double* xj = x.values.data() + (r + drj) * M + dcj;
                const double* xi = x.values.data() + (r + dri) * M + dci;
                for (Index c = 0; c < out.width; ++c) acc += xj[c] * xi[c];
            }
            G(j, i) = acc;
            G(i, j) = acc;
        }
    }
    return G;
}

EffectiveNorms effective_norms(const Kernel& k, Shape latent) {
    // Column norms of H are the adjoint applied to an all-ones observation
    // with squared taps.
    Kernel k2(k.shape, k.values.array().square().matrix());
    BlurredImage ones(valid_shape(latent, k.shape));
    ones.values.setOnes();
    GradientImage col = conv_adjoint(ones, k2, latent);
    return {latent, std::move(col.values)};
}

BoundaryMask::BoundaryMask(Shape kernel, Shape latent) : kernel_(kernel), latent_(latent) {
    require_valid(latent, kernel);
}

bool BoundaryMask::covers(Index tap, Index pixel) const {
    const Index a = tap / kernel_.width, b = tap % kernel_.width;
    const Index rr = pixel / latent_.width, cc = pixel % latent_.width;
    const Index r = rr - (kernel_.height - 1 - a);
    const Index c = cc - (kernel_.width - 1 - b);
    return r >= 0 && r <= latent_.height - kernel_.height && c >= 0 &&
           c <= latent_.width - kernel_.width;
}

Vec BoundaryMask::weighted_row_sums(const Vec& pixel_weights) const {
    if (pixel_weights.size() != latent_.size())
        throw DimensionError("pixel weight vector has wrong length");
    Image w(latent_, pixel_weights);
    Image ones(valid_shape(latent_, kernel_));
    ones.values.setOnes();
    return image_adjoint(w, ones, kernel_);
}

GradientPair gradient_filters(const Image& pixels) {
    const Index M = pixels.width(), N = pixels.height();
    GradientPair g;
    g.dx = GradientImage({std::max<Index>(M - 1, 0), N}, DerivativeFilter::dx);
    g.dy = GradientImage({M, std::max<Index>(N - 1, 0)}, DerivativeFilter::dy);
    for (Index r = 0; r < N; ++r)
        for (Index c = 0; c + 1 < M; ++c) g.dx.at(r, c) = pixels.at(r, c + 1) - pixels.at(r, c);
    for (Index r = 0; r + 1 < N; ++r)
        for (Index c = 0; c < M; ++c) g.dy.at(r, c) = pixels.at(r + 1, c) - pixels.at(r, c);
    return g;
}

Image resize_bilinear(const Image& src, Shape target) {
    if (src.size() == 0 || target.size() == 0) throw DimensionError("cannot resize an empty image");
    Image dst(target);
    const double sx = static_cast<double>(src.width()) / static_cast<double>(target.width);
    const double sy = static_cast<double>(src.height()) / static_cast<double>(target.height);
    auto coord = [](Index i, double scale, Index n) {
        double p = (static_cast<double>(i) + 0.5) * scale - 0.5;
        return std::clamp(p, 0.0, static_cast<double>(n - 1));
    };
    for (Index r = 0; r < target.height; ++r) {
        const double py = coord(r, sy, src.height());
        const Index r0 = static_cast<Index>(std::floor(py));
        const Index r1 = std::min(r0 + 1, src.height() - 1);
        const double fy = py - static_cast<double>(r0);
        for (Index c = 0; c < target.width; ++c) {
            const double px = coord(c, sx, src.width());
            const Index c0 = static_cast<Index>(std::floor(px));
            const Index c1 = std::min(c0 + 1, src.width() - 1);
            const double fx = px - static_cast<double>(c0);
            const double top = (1 - fx) * src.at(r0, c0) + fx * src.at(r0, c1);
            const double bot = (1 - fx) * src.at(r1, c0) + fx * src.at(r1, c1);
            dst.at(r, c) = (1 - fy) * top + fy * bot;
        }
    }
    return dst;
}

Kernel resize_kernel(const Kernel& k, Shape target) {
    Image r = resize_bilinear(k, target);
    Kernel out(target, r.values.cwiseMax(0.0));
    if (!(out.sum() > 0.0)) return Kernel::uniform(target);
    out.normalize();
    return out;
}

namespace {

Index odd_side_at(Index side, int level) {
    if (side <= 1) return side;
    const double target = static_cast<double>(side) / std::pow(std::sqrt(2.0), level);
    // nearest odd integer, ties toward the smaller one
    Index lo = static_cast<Index>(std::floor((target - 1.0) / 2.0)) * 2 + 1;
    if (lo < 1) lo = 1;
    const Index hi = lo + 2;
    const Index best = (target - static_cast<double>(lo) <= static_cast<double>(hi) - target) ? lo : hi;
    return std::max<Index>(best, 3 <= side ? 3 : side);
}

Index scaled_side(Index side, double scale) {
    if (side <= 1) return side;
    return std::max<Index>(1, static_cast<Index>(std::lround(static_cast<double>(side) * scale)));
}

}  // namespace

std::vector<Index> pyramid_kernel_sizes(Index kernel_side) {
    std::vector<Index> sizes{kernel_side};
    for (int s = 1; sizes.back() > 3; ++s) sizes.push_back(odd_side_at(kernel_side, s));
    return sizes;
}

std::vector<PyramidLevel> build_pyramid(const Image& image, Shape kernel) {
    require_valid(image.shape, kernel);
    const Index longest = std::max(kernel.width, kernel.height);
    const auto sides = pyramid_kernel_sizes(longest);
    std::vector<PyramidLevel> levels;
    for (int s = static_cast<int>(sides.size()) - 1; s >= 0; --s) {
        PyramidLevel lv;
        lv.level = s;
        lv.scale = 1.0 / std::pow(std::sqrt(2.0), s);
        lv.kernel = {odd_side_at(kernel.width, s), odd_side_at(kernel.height, s)};
        const Shape img{scaled_side(image.width(), lv.scale), scaled_side(image.height(), lv.scale)};
        if (img.width < lv.kernel.width || img.height < lv.kernel.height)
            throw DimensionError("kernel " + shape_str(lv.kernel) + " larger than pyramid level image " +
                                 shape_str(img));
        lv.image = s == 0 ? image : resize_bilinear(image, img);
        levels.push_back(std::move(lv));
    }
    return levels;
}

}  // namespace vbd::grids
