#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>

namespace marlcc::dynamics {

/// Kinematic state of one vehicle.
struct VehicleState {
    Eigen::Vector2d position{0.0, 0.0};  // m
    double velocity = 0.0;               // m/s
    double heading = 0.0;                // rad, in (-pi, pi]
    double yaw_rate = 0.0;               // rad/s

    /// Packs (px, py, v, psi) for the 4-state models. Yaw rate is a derived
    /// quantity and is tracked separately by the simulator.
    Eigen::Vector4d to_vector() const {
        return {position.x(), position.y(), velocity, heading};
    }
    static VehicleState from_vector(const Eigen::Vector4d& x, double yaw_rate = 0.0) {
        VehicleState s;
        s.position = {x[0], x[1]};
        s.velocity = x[2];
        s.heading = x[3];
        s.yaw_rate = yaw_rate;
        return s;
    }
};

/// Actuator command for one vehicle.
struct ControlInput {
    double acceleration = 0.0;  // m/s^2
    double steering = 0.0;      // rad, front-wheel angle
};

struct ActuatorBounds {
    double accel_min = -3.0;
    double accel_max = 3.0;
    double steer_max = 0.5;  // |delta| <= steer_max
};

/// Control-affine system  xdot = f(x) + g(x) u,  y = h(x).
///
/// Analytic Jacobians are optional; the Lie-derivative machinery falls back
/// to central finite differences with step 1e-6 * max(1, |x_i|) when they
/// are absent.
struct AffineSystem {
    int state_dim = 0;
    int input_dim = 0;
    int output_dim = 0;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> drift;           // f(x), n
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> input_map;       // g(x), n x m
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> output;          // h(x), p
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> drift_jacobian;  // optional, n x n
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> output_jacobian; // optional, p x n
    // h linear in x (zero Hessian): lets grad(L_f h) use the drift Jacobian
    // analytically instead of differencing
    bool linear_output = false;
};

/// alpha/beta pair of the input-output linearization at one state.
struct LinearizationResult {
    Eigen::VectorXd alpha;  // L_f^r h(x), size p
    Eigen::MatrixXd beta;   // L_g L_f^{r-1} h(x), p x m
    int relative_degree = 0;
    bool singular = false;       // condition number above kappa_max
    double condition_number = 0.0;
};

/// Feedback-linearized control with saturation bookkeeping.
struct FeedbackControl {
    Eigen::VectorXd u;
    bool saturated = false;
    LinearizationResult linearization;
};

/// Which vector field a Lie derivative runs along.
///  - Drift, order k:        L_f^k h
///  - InputColumn j, order k: L_{g_j} L_f^{k-1} h
enum class Along { Drift, InputColumn };

inline constexpr int kDefaultLieOrderMax = 4;
inline constexpr double kDefaultRelativeDegreeEps = 1e-8;
inline constexpr double kDefaultConditionMax = 1e6;

/// Classical fourth-order Runge-Kutta step of xdot = f(x) + g(x) u.
/// Throws IntegrationError if any evaluator yields a non-finite value.
Eigen::VectorXd rk4_step(const AffineSystem& system, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u, double dt);

/// L_f^k h (along = Drift) or L_{g_j} L_f^{k-1} h (along = InputColumn).
/// Returns one value per output. Orders above k_max are rejected because
/// nested finite differences lose too many digits beyond that depth.
Eigen::VectorXd lie_derivative(const AffineSystem& system, Along along, int order,
                               const Eigen::VectorXd& x, int input_column = 0,
                               int order_max = kDefaultLieOrderMax);

/// Full p x m matrix L_g L_f^{k-1} h(x) (column j along g_j).
Eigen::MatrixXd decoupling_matrix(const AffineSystem& system, int order,
                                  const Eigen::VectorXd& x,
                                  int order_max = kDefaultLieOrderMax);

/// Smallest r >= 1 with ||L_g L_f^{r-1} h(x)|| > eps. Throws
/// RelativeDegreeError when no r <= state_dim qualifies.
int relative_degree(const AffineSystem& system, const Eigen::VectorXd& x,
                    double eps = kDefaultRelativeDegreeEps);

/// alpha = L_f^r h, beta = L_g L_f^{r-1} h at x, with singularity flag.
LinearizationResult linearize(const AffineSystem& system, const Eigen::VectorXd& x,
                              double condition_max = kDefaultConditionMax);

/// u = beta^{-1} (v - alpha), optionally clamped to box bounds.
/// Throws SingularDecouplingError when the decoupling matrix is flagged
/// singular; callers that want to keep running fall back to the raw action.
FeedbackControl feedback_linearize(const AffineSystem& system, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& v,
                                   const Eigen::VectorXd* u_lo = nullptr,
                                   const Eigen::VectorXd* u_hi = nullptr,
                                   double condition_max = kDefaultConditionMax);

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

/// Projects velocity onto [0, v_max] and wraps heading, applied after each
/// integration step (states are (px, py, v, psi)).
Eigen::Vector4d apply_state_limits(const Eigen::Vector4d& x, double v_max);

/// 4-state kinematic bicycle: pxdot = v cos psi, pydot = v sin psi,
/// vdot = a, psidot = (v / wheelbase) * w  with model input u = (a, w),
/// w = tan(steering). Output is the full state; analytic Jacobians supplied.
AffineSystem bicycle_model(double wheelbase);

/// Double integrator xdot = (x2, u), y = x1. Used as a control test bench.
AffineSystem double_integrator();

/// SISO slice of a system: keeps the full state but exposes only input
/// column `input_index` and output component `output_index`.
AffineSystem select_channel(const AffineSystem& system, int input_index, int output_index);

/// Converts a bicycle model input (a, w = tan delta) into actuator commands,
/// clamping to the bounds. Returns the command and whether clamping bit.
ControlInput to_control_input(const Eigen::Vector2d& model_input, const ActuatorBounds& bounds,
                              bool* saturated = nullptr);

/// Inverse of to_control_input (exact when within bounds).
Eigen::Vector2d to_model_input(const ControlInput& u);

}  // namespace marlcc::dynamics
