#include "risshare/nn.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "risshare/errors.hpp"

namespace risshare {

namespace {

constexpr std::uint64_t kMlpMagic = 0x314e4e5352ULL; // "RSNN1"

using ConstMap = Eigen::Map<const Matrix>;

} // namespace

namespace blob {

void write_u64(std::ostream &out, std::uint64_t x) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
    out.write(reinterpret_cast<const char *>(b), 8);
}

std::uint64_t read_u64(std::istream &in) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char *>(b), 8)) throw Error("truncated blob");
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return x;
}

void write_f64(std::ostream &out, double x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    write_u64(out, bits);
}

double read_f64(std::istream &in) {
    const std::uint64_t bits = read_u64(in);
    double x;
    std::memcpy(&x, &bits, 8);
    return x;
}

void write_vector(std::ostream &out, const Vector &v) {
    write_u64(out, static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) write_f64(out, v[i]);
}

Vector read_vector(std::istream &in) {
    const auto n = read_u64(in);
    if (n > (1ULL << 34)) throw Error("corrupt blob: vector length " + std::to_string(n));
    Vector v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = read_f64(in);
    return v;
}

} // namespace blob

Mlp::Mlp(int input_dim, std::vector<int> hidden, int output_dim, Squash squash) : squash_(squash) {
    if (input_dim < 1 || output_dim < 1) throw InvalidConfig("network", "input and output dims must be >= 1");
    sizes_.clear();
    sizes_.push_back(input_dim);
    for (int h : hidden) {
        if (h < 1) throw InvalidConfig("network.hidden", "layer width must be >= 1");
        sizes_.push_back(h);
    }
    sizes_.push_back(output_dim);
    Eigen::Index n = 0;
    for (int l = 0; l < layers(); ++l) {
        offset_.push_back(n);
        n += static_cast<Eigen::Index>(sizes_[l + 1]) * (sizes_[l] + 1);
    }
    params_ = Vector::Zero(n);
}

void Mlp::init(Rng &rng) {
    for (int l = 0; l < layers(); ++l) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
        const Eigen::Index nw = static_cast<Eigen::Index>(sizes_[l + 1]) * sizes_[l];
        for (Eigen::Index i = 0; i < nw; ++i) params_[offset_[l] + i] = scale * rng.normal();
        params_.segment(offset_[l] + nw, sizes_[l + 1]).setZero();
    }
}

void Mlp::check_input(const Matrix &x) const {
    if (x.rows() != input_dim()) throw DimensionMismatch(input_dim(), x.rows());
}

Matrix Mlp::forward(const Matrix &x) const {
    Cache cache;
    return forward(x, cache);
}

Vector Mlp::forward(const Vector &x) const {
    Matrix out = forward(Matrix(x));
    return out.col(0);
}

Matrix Mlp::forward(const Matrix &x, Cache &cache) const {
    check_input(x);
    cache.act.resize(layers() + 1);
    cache.act[0] = x;
    for (int l = 0; l < layers(); ++l) {
        const int in = sizes_[l], out = sizes_[l + 1];
        ConstMap W(params_.data() + offset_[l], out, in);
        auto b = params_.segment(offset_[l] + static_cast<Eigen::Index>(out) * in, out);
        Matrix z = W * cache.act[l];
        z.colwise() += b;
        if (l + 1 < layers())
            z = z.cwiseMax(0.0);
        else if (squash_ == Squash::tanh)
            z = z.array().tanh().matrix();
        cache.act[l + 1] = std::move(z);
    }
    return cache.act.back();
}

Matrix Mlp::backward(const Cache &cache, const Matrix &grad_out, Eigen::Ref<Vector> grad, bool want_input_grad) const {
    if (grad.size() != param_count()) throw DimensionMismatch(param_count(), grad.size());
    Matrix delta = grad_out;
    if (squash_ == Squash::tanh) delta.array() *= 1.0 - cache.act.back().array().square();
    for (int l = layers() - 1; l >= 0; --l) {
        const int in = sizes_[l], out = sizes_[l + 1];
        ConstMap W(params_.data() + offset_[l], out, in);
        Eigen::Map<Matrix> dW(grad.data() + offset_[l], out, in);
        dW.noalias() += delta * cache.act[l].transpose();
        grad.segment(offset_[l] + static_cast<Eigen::Index>(out) * in, out) += delta.rowwise().sum();
        if (l == 0 && !want_input_grad) break;
        Matrix prev = W.transpose() * delta;
        if (l > 0) prev.array() *= (cache.act[l].array() > 0.0).cast<double>();
        delta = std::move(prev);
    }
    return want_input_grad ? delta : Matrix();
}

void Mlp::soft_update_from(const Mlp &online, double tau) {
    if (online.param_count() != param_count()) throw DimensionMismatch(param_count(), online.param_count());
    params_ = tau * online.params_ + (1.0 - tau) * params_;
}

void Mlp::save(std::ostream &out, std::uint64_t seed, std::uint64_t step) const {
    blob::write_u64(out, kMlpMagic);
    blob::write_u64(out, sizes_.size());
    for (int s : sizes_) blob::write_u64(out, static_cast<std::uint64_t>(s));
    blob::write_u64(out, squash_ == Squash::tanh ? 1 : 0);
    blob::write_u64(out, seed);
    blob::write_u64(out, step);
    blob::write_vector(out, params_);
}

Mlp Mlp::load(std::istream &in, std::uint64_t *seed, std::uint64_t *step) {
    if (blob::read_u64(in) != kMlpMagic) throw Error("not a network blob");
    const auto n = blob::read_u64(in);
    if (n < 2 || n > 64) throw Error("corrupt network blob: layer count");
    std::vector<int> sizes(n);
    for (auto &s : sizes) s = static_cast<int>(blob::read_u64(in));
    const Squash squash = blob::read_u64(in) ? Squash::tanh : Squash::none;
    const auto sd = blob::read_u64(in);
    const auto st = blob::read_u64(in);
    Mlp net(sizes.front(), std::vector<int>(sizes.begin() + 1, sizes.end() - 1), sizes.back(), squash);
    Vector p = blob::read_vector(in);
    if (p.size() != net.param_count()) throw DimensionMismatch(net.param_count(), p.size());
    net.params_ = std::move(p);
    if (seed) *seed = sd;
    if (step) *step = st;
    return net;
}

Vector gradient(const Mlp &net, const Vector &input, const LossHead &head) {
    Mlp::Cache cache;
    const Matrix out = net.forward(Matrix(input), cache);
    Vector dout = Vector::Zero(out.rows());
    head(out.col(0), dout);
    Vector grad = Vector::Zero(net.param_count());
    net.backward(cache, Matrix(dout), grad);
    return grad;
}

Adam::Adam(Eigen::Index n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(Vector::Zero(n)), v_(Vector::Zero(n)) {}

void Adam::step(Eigen::Ref<Vector> params, const Eigen::Ref<const Vector> &grad) {
    if (params.size() != m_.size()) throw DimensionMismatch(m_.size(), params.size());
    if (grad.size() != m_.size()) throw DimensionMismatch(m_.size(), grad.size());
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

void Adam::save(std::ostream &out) const {
    blob::write_f64(out, lr_);
    blob::write_f64(out, beta1_);
    blob::write_f64(out, beta2_);
    blob::write_f64(out, eps_);
    blob::write_u64(out, static_cast<std::uint64_t>(t_));
    blob::write_vector(out, m_);
    blob::write_vector(out, v_);
}

void Adam::load(std::istream &in) {
    lr_ = blob::read_f64(in);
    beta1_ = blob::read_f64(in);
    beta2_ = blob::read_f64(in);
    eps_ = blob::read_f64(in);
    t_ = static_cast<std::int64_t>(blob::read_u64(in));
    m_ = blob::read_vector(in);
    v_ = blob::read_vector(in);
}

} // namespace risshare
