#include "deepsplit/optim.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "deepsplit/errors.hpp"

namespace deepsplit {

AdamState AdamState::zeros(Eigen::Index size) {
    return AdamState{Eigen::VectorXd::Zero(size), Eigen::VectorXd::Zero(size), 0};
}

void adam_update(AdamState& state, Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr,
                 const AdamConfig& config) {
    if (grad.size() != theta.size() || state.m.size() != theta.size() ||
        state.v.size() != theta.size()) {
        throw ShapeError("adam: parameter, gradient and moment lengths differ");
    }
    ++state.step;
    const double k = static_cast<double>(state.step);
    state.m = config.beta1 * state.m + (1.0 - config.beta1) * grad;
    state.v = config.beta2 * state.v + (1.0 - config.beta2) * grad.cwiseAbs2();
    const double bias1 = 1.0 - std::pow(config.beta1, k);
    const double bias2 = 1.0 - std::pow(config.beta2, k);
    theta.array() -= (lr * state.m.array() / bias1) /
                     ((state.v.array().abs() / bias2).sqrt() + config.epsilon);
}

std::pair<AdamState, Eigen::VectorXd> adam_step(AdamState state, Eigen::VectorXd theta,
                                                const Eigen::VectorXd& grad, double lr,
                                                const AdamConfig& config) {
    adam_update(state, theta, grad, lr, config);
    return {std::move(state), std::move(theta)};
}

Eigen::VectorXd sgd_step(const Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr) {
    if (grad.size() != theta.size()) throw ShapeError("sgd: parameter and gradient lengths differ");
    return theta - lr * grad;
}

LrSchedule::LrSchedule(std::vector<Piece> pieces) : pieces_(std::move(pieces)) {
    if (pieces_.empty()) throw std::invalid_argument("learning-rate schedule is empty");
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
        if (!(pieces_[i].rate > 0.0)) throw std::invalid_argument("learning rates must be > 0");
        if (i > 0 && pieces_[i].bound <= pieces_[i - 1].bound) {
            throw std::invalid_argument("learning-rate bounds must be strictly increasing");
        }
    }
}

LrSchedule LrSchedule::parse(std::string_view text) {
    std::vector<Piece> pieces;
    while (!text.empty()) {
        const auto comma = text.find(',');
        std::string_view item = text.substr(0, comma);
        text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        const auto colon = item.find(':');
        if (colon == std::string_view::npos) {
            throw std::invalid_argument("schedule entry '" + std::string(item) +
                                        "' is not of the form bound:rate");
        }
        Piece piece{};
        const auto bound_text = item.substr(0, colon);
        const auto rate_text = item.substr(colon + 1);
        auto [p1, e1] = std::from_chars(bound_text.data(), bound_text.data() + bound_text.size(),
                                        piece.bound);
        auto [p2, e2] = std::from_chars(rate_text.data(), rate_text.data() + rate_text.size(),
                                        piece.rate);
        if (e1 != std::errc{} || p1 != bound_text.data() + bound_text.size() ||
            e2 != std::errc{} || p2 != rate_text.data() + rate_text.size()) {
            throw std::invalid_argument("schedule entry '" + std::string(item) +
                                        "' is not of the form bound:rate");
        }
        pieces.push_back(piece);
    }
    return LrSchedule(std::move(pieces));
}

LrSchedule LrSchedule::constant(double rate, long bound) {
    return LrSchedule({{bound, rate}});
}

double LrSchedule::at(long m) const {
    if (pieces_.empty()) throw std::logic_error("learning-rate schedule is empty");
    for (const auto& piece : pieces_) {
        if (m <= piece.bound) return piece.rate;
    }
    return pieces_.back().rate;
}

LrSchedule LrSchedule::scaled(double factor) const {
    std::vector<Piece> pieces;
    for (const auto& piece : pieces_) {
        const long bound = std::lround(static_cast<double>(piece.bound) * factor);
        if (!pieces.empty() && bound <= pieces.back().bound) continue;
        pieces.push_back({bound, piece.rate});
    }
    return LrSchedule(std::move(pieces));
}

std::string LrSchedule::to_string() const {
    std::string out;
    char buf[64];
    for (const auto& piece : pieces_) {
        std::snprintf(buf, sizeof buf, "%s%ld:%g", out.empty() ? "" : ",", piece.bound, piece.rate);
        out += buf;
    }
    return out;
}

double lr_at(const LrSchedule& schedule, long m) {
    return schedule.at(m);
}

}  // namespace deepsplit
