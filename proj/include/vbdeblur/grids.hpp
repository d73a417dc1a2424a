#pragma once

// Derivative-domain images, blur kernels and the valid-region convolution
// operator they share. Every image is stored row-major ("lexicographic"):
// pixel (row r, column c) lives at index r * width + c.

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace vbd::grids {

using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

struct Shape {
    Index width = 0;   // columns (M for images, P for kernels)
    Index height = 0;  // rows    (N for images, Q for kernels)

    Index size() const { return width * height; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

// Plain real-valued raster. Base for the three domain grids below.
struct Image {
    Shape shape;
    Vec values;

    Image() = default;
    Image(Shape s) : shape(s), values(Vec::Zero(s.size())) {}
    Image(Shape s, Vec v);

    Index width() const { return shape.width; }
    Index height() const { return shape.height; }
    Index size() const { return shape.size(); }

    double& at(Index row, Index col) { return values[row * shape.width + col]; }
    double at(Index row, Index col) const { return values[row * shape.width + col]; }
};

enum class DerivativeFilter : std::uint8_t { none, dx, dy };

// Sharp-image derivatives x (or the posterior mean mu).
struct GradientImage : Image {
    DerivativeFilter filter = DerivativeFilter::none;

    GradientImage() = default;
    GradientImage(Shape s, DerivativeFilter f = DerivativeFilter::none) : Image(s), filter(f) {}
    GradientImage(Shape s, Vec v, DerivativeFilter f = DerivativeFilter::none)
        : Image(s, std::move(v)), filter(f) {}
};

// Observation y, valid region of k * x: (M-P+1) x (N-Q+1).
struct BlurredImage : Image {
    using Image::Image;
};

// Nonnegative blur kernel k of P x Q taps.
struct Kernel : Image {
    using Image::Image;

    static Kernel delta(Shape s);
    static Kernel uniform(Shape s);

    double sum() const { return values.sum(); }
    double squared_norm() const { return values.squaredNorm(); }
    // Throws InvalidArgument on a negative or non-finite tap.
    void validate() const;
    // Scales to unit sum; throws if the sum is not positive.
    void normalize();
    bool is_normalized(double tol = 1e-12) const;
};

// Output shape of the valid convolution of an image with a kernel.
Shape valid_shape(Shape image, Shape kernel);
// Inverse: latent image shape for an observation and kernel.
Shape latent_shape(Shape observation, Shape kernel);

// y = k * x over the valid region (true convolution, kernel flipped).
BlurredImage convolve_valid(const Image& x, const Kernel& k);
// x = H^T y, the exact adjoint of convolve_valid for a latent image of `latent` shape.
GradientImage conv_adjoint(const Image& y, const Kernel& k, Shape latent);

// Convolution-matrix view with the latent image fixed: y = W k.
// Returns W^T y for a given observation.
Vec image_adjoint(const Image& x, const Image& y, Shape kernel);
// Gram matrix W^T W (l x l) of the latent image.
Eigen::MatrixXd image_gram(const Image& x, Shape kernel);

// Per-pixel squared column norms of H: sum_j k_j^2 Ibar_ji.
struct EffectiveNorms {
    Shape shape;
    Vec values;
};

EffectiveNorms effective_norms(const Kernel& k, Shape latent);

// Binary l x m matrix Ibar: tap j touches latent pixel i inside the valid region.
class BoundaryMask {
public:
    BoundaryMask(Shape kernel, Shape latent);

    Shape kernel_shape() const { return kernel_; }
    Shape latent_shape() const { return latent_; }
    bool covers(Index tap, Index pixel) const;
    // Row sums weighted by a per-pixel vector: out_j = sum_i w_i Ibar_ji.
    Vec weighted_row_sums(const Vec& pixel_weights) const;

private:
    Shape kernel_;
    Shape latent_;
};

// Horizontal [1,-1] and vertical [1,-1]^T derivatives over the valid region:
// dx(r,c) = x(r,c+1) - x(r,c), dy(r,c) = x(r+1,c) - x(r,c).
struct GradientPair {
    GradientImage dx;
    GradientImage dy;
};
GradientPair gradient_filters(const Image& pixels);

// Bilinear resampling to an arbitrary target shape (pixel centers aligned).
Image resize_bilinear(const Image& src, Shape target);
// Bilinear kernel resampling, negative taps clamped, renormalized to unit sum.
Kernel resize_kernel(const Kernel& k, Shape target);

// One rung of the coarse-to-fine ladder.
struct PyramidLevel {
    int level = 0;        // 0 = finest
    double scale = 1.0;   // image size relative to the finest level
    Image image;
    Shape kernel;
};

// Levels ordered coarsest first. Each level shrinks by sqrt(2); kernel side
// at level s is the odd integer nearest size / sqrt(2)^s (ties round down),
// stopping once the kernel reaches 3 taps per side.
std::vector<PyramidLevel> build_pyramid(const Image& image, Shape kernel);
// Kernel side lengths alone, finest first.
std::vector<Index> pyramid_kernel_sizes(Index kernel_side);

}  // namespace vbd::grids
