#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "risshare/rng.hpp"

namespace risshare {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Squash { none, tanh };

// Fully connected ReLU network. All weights and biases live in one flat vector;
// layer l stores W_l (out x in, column major) followed by b_l. Batches are
// passed as matrices with one sample per column.
class Mlp {
public:
    struct Cache {
        std::vector<Matrix> act; // act[0] = input, act[l] = output of layer l
    };

    Mlp() = default;
    Mlp(int input_dim, std::vector<int> hidden, int output_dim, Squash squash = Squash::none);

    // Gaussian weights with std 1/sqrt(fan_in), zero biases.
    void init(Rng &rng);

    int input_dim() const { return sizes_.front(); }
    int output_dim() const { return sizes_.back(); }
    const std::vector<int> &sizes() const { return sizes_; }
    Squash squash() const { return squash_; }
    Eigen::Index param_count() const { return params_.size(); }

    Vector &params() { return params_; }
    const Vector &params() const { return params_; }

    Matrix forward(const Matrix &x) const;
    Matrix forward(const Matrix &x, Cache &cache) const;
    Vector forward(const Vector &x) const;

    // Accumulates dL/dparams into `grad` given dL/doutput (post-squash).
    // Returns dL/dinput when `want_input_grad` is set, an empty matrix otherwise.
    Matrix backward(const Cache &cache, const Matrix &grad_out, Eigen::Ref<Vector> grad,
                    bool want_input_grad = false) const;

    // theta' <- tau * theta + (1 - tau) * theta'
    void soft_update_from(const Mlp &online, double tau);

    void save(std::ostream &out, std::uint64_t seed = 0, std::uint64_t step = 0) const;
    static Mlp load(std::istream &in, std::uint64_t *seed = nullptr, std::uint64_t *step = nullptr);

    bool operator==(const Mlp &o) const { return sizes_ == o.sizes_ && squash_ == o.squash_ && params_ == o.params_; }

private:
    int layers() const { return static_cast<int>(sizes_.size()) - 1; }
    void check_input(const Matrix &x) const;

    std::vector<int> sizes_{0};
    std::vector<Eigen::Index> offset_; // start of W_l in params_
    Squash squash_ = Squash::none;
    Vector params_;
};

// Gradient of head(net(input)) w.r.t. the parameters. `head` returns the loss and
// writes dL/doutput into its second argument.
using LossHead = std::function<double(const Vector &output, Vector &grad_output)>;
Vector gradient(const Mlp &net, const Vector &input, const LossHead &head);

class Adam {
public:
    Adam() = default;
    explicit Adam(Eigen::Index n, double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(Eigen::Ref<Vector> params, const Eigen::Ref<const Vector> &grad);

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }
    std::int64_t steps() const { return t_; }

    void save(std::ostream &out) const;
    void load(std::istream &in);

private:
    double lr_ = 1e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    std::int64_t t_ = 0;
    Vector m_, v_;
};

// Raw little-endian blob helpers shared by the checkpoint writers.
namespace blob {
void write_u64(std::ostream &out, std::uint64_t x);
std::uint64_t read_u64(std::istream &in);
void write_f64(std::ostream &out, double x);
double read_f64(std::istream &in);
void write_vector(std::ostream &out, const Vector &v);
Vector read_vector(std::istream &in);
} // namespace blob

} // namespace risshare
