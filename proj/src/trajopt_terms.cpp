#include "kmp/trajopt_terms.hpp"

#include <cmath>

namespace kmp::terms {
namespace {

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

int extra_dim(const SystemModel& system) { return system.kind == SystemKind::CarTrailer ? 1 : 0; }

int equality_dim(const SystemModel& system) { return system.kind == SystemKind::Unicycle1 ? 1 : 3; }

Transition transition(const SystemModel& system, const VectorRef& x0, const VectorRef& x1,
                      const VectorRef& e) {
  const int n = system.state_dim;
  const int m = system.control_dim;
  const int ne = extra_dim(system);
  const int nh = equality_dim(system);
  const double dt = system.dt;

  Transition t;
  t.h = SmallVector::Zero(nh);
  t.u = SmallVector::Zero(m);
  t.dh_dx0 = SmallMatrix::Zero(nh, n);
  t.dh_dx1 = SmallMatrix::Zero(nh, n);
  t.dh_de = SmallMatrix::Zero(nh, ne);
  t.du_dx0 = SmallMatrix::Zero(m, n);
  t.du_dx1 = SmallMatrix::Zero(m, n);
  t.du_de = SmallMatrix::Zero(m, ne);

  const double dx = x1(0) - x0(0);
  const double dy = x1(1) - x0(1);
  const double c = std::cos(x0(2));
  const double s = std::sin(x0(2));
  // Displacement along and across the heading.
  const double along = c * dx + s * dy;
  const double across = -s * dx + c * dy;

  switch (system.kind) {
    case SystemKind::Unicycle1: {
      t.h(0) = across;
      t.dh_dx0.row(0) << s, -c, -along;
      t.dh_dx1.row(0) << -s, c, 0.0;

      t.u(0) = along / dt;
      t.u(1) = (x1(2) - x0(2)) / dt;
      t.du_dx0.row(0) << -c / dt, -s / dt, across / dt;
      t.du_dx1.row(0) << c / dt, s / dt, 0.0;
      t.du_dx0(1, 2) = -1.0 / dt;
      t.du_dx1(1, 2) = 1.0 / dt;
      break;
    }
    case SystemKind::Unicycle2: {
      const double v = x0(3);
      const double w = x0(4);
      t.h(0) = dx - v * c * dt;
      t.h(1) = dy - v * s * dt;
      t.h(2) = (x1(2) - x0(2)) - w * dt;
      t.dh_dx0.row(0) << -1.0, 0.0, v * s * dt, -c * dt, 0.0;
      t.dh_dx1(0, 0) = 1.0;
      t.dh_dx0.row(1) << 0.0, -1.0, -v * c * dt, -s * dt, 0.0;
      t.dh_dx1(1, 1) = 1.0;
      t.dh_dx0.row(2) << 0.0, 0.0, -1.0, 0.0, -dt;
      t.dh_dx1(2, 2) = 1.0;

      t.u(0) = (x1(3) - x0(3)) / dt;
      t.u(1) = (x1(4) - x0(4)) / dt;
      t.du_dx0(0, 3) = -1.0 / dt;
      t.du_dx1(0, 3) = 1.0 / dt;
      t.du_dx0(1, 4) = -1.0 / dt;
      t.du_dx1(1, 4) = 1.0 / dt;
      break;
    }
    case SystemKind::CarTrailer: {
      const double L = system.wheelbase;
      const double d1 = system.hitch_length;
      const double phi = e(0);
      const double tphi = std::tan(phi);
      const double cphi = std::cos(phi);
      const double hitch = x0(2) - x0(3);
      const double sh = std::sin(hitch);
      const double ch = std::cos(hitch);

      Eigen::RowVector4d dalong_dx0, dalong_dx1;
      dalong_dx0 << -c, -s, across, 0.0;
      dalong_dx1 << c, s, 0.0, 0.0;

      t.h(0) = across;
      t.dh_dx0.row(0) << s, -c, -along, 0.0;
      t.dh_dx1.row(0) << -s, c, 0.0, 0.0;

      t.h(1) = (x1(2) - x0(2)) - along * tphi / L;
      t.dh_dx0.row(1) = -tphi / L * dalong_dx0;
      t.dh_dx0(1, 2) -= 1.0;
      t.dh_dx1.row(1) = -tphi / L * dalong_dx1;
      t.dh_dx1(1, 2) += 1.0;
      t.dh_de(1, 0) = -along / (L * cphi * cphi);

      t.h(2) = (x1(3) - x0(3)) - along * sh / d1;
      t.dh_dx0.row(2) = -sh / d1 * dalong_dx0;
      t.dh_dx0(2, 3) -= 1.0;
      t.dh_dx0(2, 2) -= along * ch / d1;
      t.dh_dx0(2, 3) += along * ch / d1;
      t.dh_dx1.row(2) = -sh / d1 * dalong_dx1;
      t.dh_dx1(2, 3) += 1.0;

      t.u(0) = along / dt;
      t.u(1) = phi;
      t.du_dx0.row(0) = dalong_dx0 / dt;
      t.du_dx1.row(0) = dalong_dx1 / dt;
      t.du_de(1, 0) = 1.0;
      break;
    }
  }
  return t;
}

BodyPose body_pose(const SystemModel& system, const RobotShape& shape, std::size_t body,
                   const VectorRef& x) {
  BodyPose p;
  p.rect.half = 0.5 * shape.sizes.at(body);
  p.dcenter_dx.setZero(2, system.state_dim);
  p.dangle_dx.setZero(1, system.state_dim);
  p.dcenter_dx(0, 0) = 1.0;
  p.dcenter_dx(1, 1) = 1.0;
  if (body == 0) {
    p.rect.center = x.head<2>();
    p.rect.angle = x(2);
    p.dangle_dx(2) = 1.0;
  } else {
    const double th1 = x(3);
    const double d1 = system.hitch_length;
    p.rect.center = x.head<2>() - d1 * Eigen::Vector2d(std::cos(th1), std::sin(th1));
    p.rect.angle = th1;
    p.dcenter_dx(0, 3) = d1 * std::sin(th1);
    p.dcenter_dx(1, 3) = -d1 * std::cos(th1);
    p.dangle_dx(3) = 1.0;
  }
  return p;
}

SeparationGradient separation_gradient(const OrientedRect& rect, const Box& box) {
  const double c = std::cos(rect.angle);
  const double s = std::sin(rect.angle);
  const double ac = std::abs(c);
  const double as = std::abs(s);
  // Derivatives of |cos| and |sin| with respect to the angle.
  const double dac = -sgn(c) * s;
  const double das = sgn(s) * c;
  const Eigen::Vector2d d = box.center - rect.center;
  const double a = rect.half.x();
  const double b = rect.half.y();
  const double hx = box.half.x();
  const double hy = box.half.y();

  SeparationGradient best;
  best.value = -std::numeric_limits<double>::infinity();
  auto consider = [&](double value, const Eigen::Vector2d& dcenter, double dangle) {
    if (value > best.value) best = {value, dcenter, dangle};
  };

  consider(std::abs(d.x()) - (a * ac + b * as + hx), {-sgn(d.x()), 0.0}, -(a * dac + b * das));
  consider(std::abs(d.y()) - (a * as + b * ac + hy), {0.0, -sgn(d.y())}, -(a * das + b * dac));

  const double p1 = d.x() * c + d.y() * s;
  consider(std::abs(p1) - (a + hx * ac + hy * as), -sgn(p1) * Eigen::Vector2d(c, s),
           sgn(p1) * (-d.x() * s + d.y() * c) - (hx * dac + hy * das));

  const double p2 = -d.x() * s + d.y() * c;
  consider(std::abs(p2) - (b + hx * as + hy * ac), sgn(p2) * Eigen::Vector2d(s, -c),
           sgn(p2) * (-d.x() * c - d.y() * s) - (hx * das + hy * dac));
  return best;
}

StateSeparation state_separation(const SystemModel& system, const RobotShape& shape,
                                 std::size_t body, const Box& box, const VectorRef& x) {
  const BodyPose pose = body_pose(system, shape, body, x);
  const SeparationGradient g = separation_gradient(pose.rect, box);
  StateSeparation out;
  out.value = g.value;
  out.dx = g.dcenter.transpose() * pose.dcenter_dx + g.dangle * pose.dangle_dx;
  return out;
}

}  // namespace kmp::terms
