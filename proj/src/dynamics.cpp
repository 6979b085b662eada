#include "marlcc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "marlcc/error.hpp"

namespace marlcc::dynamics {

namespace {

void check_finite(const Eigen::VectorXd& v, const char* component) {
    if (!v.allFinite()) {
        throw IntegrationError(std::string("non-finite value produced by ") + component);
    }
}

Eigen::VectorXd eval_xdot(const AffineSystem& s, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& u) {
    Eigen::VectorXd f = s.drift(x);
    check_finite(f, "drift f(x)");
    if (s.input_dim > 0) {
        Eigen::MatrixXd g = s.input_map(x);
        if (!g.allFinite()) throw IntegrationError("non-finite value produced by input map g(x)");
        f.noalias() += g * u;
    }
    return f;
}

// Central-difference gradient of a scalar field, step 1e-6 * max(1, |x_i|).
Eigen::RowVectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& phi,
                               const Eigen::VectorXd& x) {
    Eigen::RowVectorXd grad(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
        const double orig = x[i];
        xp[i] = orig + h;
        const double hi = phi(xp);
        xp[i] = orig - h;
        const double lo = phi(xp);
        xp[i] = orig;
        grad[i] = (hi - lo) / (2.0 * h);
    }
    return grad;
}

Eigen::RowVectorXd lie_f_gradient(const AffineSystem& s, int order, int out_idx,
                                  const Eigen::VectorXd& x);

// L_f^k h_i as a scalar field: grad(L_f^{k-1} h_i) . f, where the gradient
// uses the analytic Jacobians where they apply and central differences
// otherwise.
double lie_f_scalar(const AffineSystem& s, int order, int out_idx, const Eigen::VectorXd& x) {
    if (order == 0) return s.output(x)[out_idx];
    return lie_f_gradient(s, order - 1, out_idx, x).dot(s.drift(x));
}

// Gradient of L_f^{k} h_i, used for the along-g derivative.
Eigen::RowVectorXd lie_f_gradient(const AffineSystem& s, int order, int out_idx,
                                  const Eigen::VectorXd& x) {
    if (order == 0 && s.output_jacobian) return s.output_jacobian(x).row(out_idx);
    // for a linear output, grad(L_f h) = grad(h) Jf exactly (zero Hessian)
    if (order == 1 && s.linear_output && s.output_jacobian && s.drift_jacobian) {
        return s.output_jacobian(x).row(out_idx) * s.drift_jacobian(x);
    }
    auto field = [&](const Eigen::VectorXd& y) { return lie_f_scalar(s, order, out_idx, y); };
    return fd_gradient(field, x);
}

}  // namespace

Eigen::VectorXd rk4_step(const AffineSystem& system, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u, double dt) {
    if (!(dt > 0.0)) throw IntegrationError("rk4_step requires dt > 0");
    if (!x.allFinite() || !u.allFinite()) throw IntegrationError("rk4_step requires finite x, u");
    const Eigen::VectorXd k1 = eval_xdot(system, x, u);
    const Eigen::VectorXd k2 = eval_xdot(system, x + 0.5 * dt * k1, u);
    const Eigen::VectorXd k3 = eval_xdot(system, x + 0.5 * dt * k2, u);
    const Eigen::VectorXd k4 = eval_xdot(system, x + dt * k3, u);
    Eigen::VectorXd out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    check_finite(out, "rk4 state update");
    return out;
}

Eigen::VectorXd lie_derivative(const AffineSystem& system, Along along, int order,
                               const Eigen::VectorXd& x, int input_column, int order_max) {
    if (order < 1) throw OrderLimitError("lie_derivative order must be >= 1");
    if (order > order_max) {
        throw OrderLimitError("lie_derivative order " + std::to_string(order) +
                              " exceeds the supported maximum " + std::to_string(order_max));
    }
    Eigen::VectorXd out(system.output_dim);
    if (along == Along::Drift) {
        for (int i = 0; i < system.output_dim; ++i) out[i] = lie_f_scalar(system, order, i, x);
        return out;
    }
    const Eigen::MatrixXd g = system.input_map(x);
    for (int i = 0; i < system.output_dim; ++i) {
        out[i] = lie_f_gradient(system, order - 1, i, x).dot(g.col(input_column));
    }
    return out;
}

Eigen::MatrixXd decoupling_matrix(const AffineSystem& system, int order,
                                  const Eigen::VectorXd& x, int order_max) {
    if (order < 1 || order > order_max) {
        throw OrderLimitError("decoupling_matrix order out of range");
    }
    const Eigen::MatrixXd g = system.input_map(x);
    Eigen::MatrixXd beta(system.output_dim, system.input_dim);
    for (int i = 0; i < system.output_dim; ++i) {
        const Eigen::RowVectorXd grad = lie_f_gradient(system, order - 1, i, x);
        for (int j = 0; j < system.input_dim; ++j) beta(i, j) = grad.dot(g.col(j));
    }
    return beta;
}

int relative_degree(const AffineSystem& system, const Eigen::VectorXd& x, double eps) {
    for (int r = 1; r <= system.state_dim; ++r) {
        if (decoupling_matrix(system, r, x, system.state_dim).norm() > eps) return r;
    }
    throw RelativeDegreeError("no relative degree r <= n: input never reaches the output chain");
}

LinearizationResult linearize(const AffineSystem& system, const Eigen::VectorXd& x,
                              double condition_max) {
    LinearizationResult res;
    res.relative_degree = relative_degree(system, x);
    res.alpha = lie_derivative(system, Along::Drift, res.relative_degree, x, 0,
                               system.state_dim);
    res.beta = decoupling_matrix(system, res.relative_degree, x, system.state_dim);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(res.beta);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    res.condition_number = (smin > 0.0) ? smax / smin : std::numeric_limits<double>::infinity();
    res.singular = !(res.condition_number <= condition_max);
    return res;
}

FeedbackControl feedback_linearize(const AffineSystem& system, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& v, const Eigen::VectorXd* u_lo,
                                   const Eigen::VectorXd* u_hi, double condition_max) {
    FeedbackControl fc;
    try {
        fc.linearization = linearize(system, x, condition_max);
    } catch (const RelativeDegreeError&) {
        throw SingularDecouplingError("decoupling matrix is identically zero at this state");
    }
    if (fc.linearization.singular) {
        throw SingularDecouplingError(
            "decoupling matrix condition number " +
            std::to_string(fc.linearization.condition_number) + " exceeds the threshold");
    }
    fc.u = fc.linearization.beta.colPivHouseholderQr().solve(v - fc.linearization.alpha);
    if (u_lo && u_hi) {
        for (Eigen::Index i = 0; i < fc.u.size(); ++i) {
            const double clamped = std::clamp(fc.u[i], (*u_lo)[i], (*u_hi)[i]);
            if (clamped != fc.u[i]) fc.saturated = true;
            fc.u[i] = clamped;
        }
    }
    return fc;
}

double wrap_angle(double a) {
    a = std::fmod(a + M_PI, 2.0 * M_PI);
    if (a < 0.0) a += 2.0 * M_PI;
    a -= M_PI;  // now in [-pi, pi)
    return a == -M_PI ? M_PI : a;
}

Eigen::Vector4d apply_state_limits(const Eigen::Vector4d& x, double v_max) {
    Eigen::Vector4d out = x;
    out[2] = std::clamp(out[2], 0.0, v_max);
    out[3] = wrap_angle(out[3]);
    return out;
}

AffineSystem bicycle_model(double wheelbase) {
    AffineSystem s;
    s.state_dim = 4;
    s.input_dim = 2;
    s.output_dim = 4;
    s.drift = [](const Eigen::VectorXd& x) {
        Eigen::VectorXd f(4);
        f << x[2] * std::cos(x[3]), x[2] * std::sin(x[3]), 0.0, 0.0;
        return f;
    };
    s.input_map = [wheelbase](const Eigen::VectorXd& x) {
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(4, 2);
        g(2, 0) = 1.0;
        g(3, 1) = x[2] / wheelbase;
        return g;
    };
    s.output = [](const Eigen::VectorXd& x) { return x; };
    s.drift_jacobian = [](const Eigen::VectorXd& x) {
        Eigen::MatrixXd j = Eigen::MatrixXd::Zero(4, 4);
        j(0, 2) = std::cos(x[3]);
        j(0, 3) = -x[2] * std::sin(x[3]);
        j(1, 2) = std::sin(x[3]);
        j(1, 3) = x[2] * std::cos(x[3]);
        return j;
    };
    s.output_jacobian = [](const Eigen::VectorXd&) {
        return Eigen::MatrixXd::Identity(4, 4);
    };
    s.linear_output = true;
    return s;
}

AffineSystem double_integrator() {
    AffineSystem s;
    s.state_dim = 2;
    s.input_dim = 1;
    s.output_dim = 1;
    s.drift = [](const Eigen::VectorXd& x) {
        Eigen::VectorXd f(2);
        f << x[1], 0.0;
        return f;
    };
    s.input_map = [](const Eigen::VectorXd&) {
        Eigen::MatrixXd g(2, 1);
        g << 0.0, 1.0;
        return g;
    };
    s.output = [](const Eigen::VectorXd& x) {
        return Eigen::VectorXd::Constant(1, x[0]);
    };
    s.drift_jacobian = [](const Eigen::VectorXd&) {
        Eigen::MatrixXd j(2, 2);
        j << 0.0, 1.0, 0.0, 0.0;
        return j;
    };
    s.output_jacobian = [](const Eigen::VectorXd&) {
        Eigen::MatrixXd j(1, 2);
        j << 1.0, 0.0;
        return j;
    };
    s.linear_output = true;
    return s;
}

AffineSystem select_channel(const AffineSystem& system, int input_index, int output_index) {
    AffineSystem s;
    s.state_dim = system.state_dim;
    s.input_dim = 1;
    s.output_dim = 1;
    s.drift = system.drift;
    s.input_map = [sys = system, input_index](const Eigen::VectorXd& x) {
        return Eigen::MatrixXd(sys.input_map(x).col(input_index));
    };
    s.output = [sys = system, output_index](const Eigen::VectorXd& x) {
        return Eigen::VectorXd::Constant(1, sys.output(x)[output_index]);
    };
    s.drift_jacobian = system.drift_jacobian;
    s.linear_output = system.linear_output;
    if (system.output_jacobian) {
        s.output_jacobian = [sys = system, output_index](const Eigen::VectorXd& x) {
            return Eigen::MatrixXd(sys.output_jacobian(x).row(output_index));
        };
    }
    return s;
}

ControlInput to_control_input(const Eigen::Vector2d& model_input, const ActuatorBounds& bounds,
                              bool* saturated) {
    ControlInput u;
    u.acceleration = std::clamp(model_input[0], bounds.accel_min, bounds.accel_max);
    const double steer = std::atan(model_input[1]);
    u.steering = std::clamp(steer, -bounds.steer_max, bounds.steer_max);
    if (saturated) {
        *saturated = (u.acceleration != model_input[0]) || (u.steering != steer);
    }
    return u;
}

Eigen::Vector2d to_model_input(const ControlInput& u) {
    return {u.acceleration, std::tan(u.steering)};
}

}  // namespace marlcc::dynamics
