#include "skytalk/rng.hpp"
#include "skytalk/scene.hpp"

namespace skytalk {

MoveResult apply_move(const Pose& pose, MoveCommand command, const Box& bounds) {
  Vec3 delta;
  switch (command) {
    case MoveCommand::Closer: delta = pose.heading() * kMoveCloserMeters; break;
    case MoveCommand::Back: delta = pose.heading() * -kMoveBackMeters; break;
    case MoveCommand::Left: delta = pose.left() * kMoveSideMeters; break;
    case MoveCommand::Right: delta = pose.left() * -kMoveSideMeters; break;
  }
  const Vec3 target = pose.position + delta;
  MoveResult result;
  result.pose = pose;
  result.pose.position = bounds.clamp(target);
  result.clamped = !(result.pose.position == target);
  return result;
}

Pose perturb_pose(const Pose& pose, double sigma, Rng& rng, const Box& bounds) {
  if (sigma <= 0.0) return pose;
  Pose out = pose;
  const double dx = rng.gaussian() * sigma;
  const double dy = rng.gaussian() * sigma;
  out.position.x += dx;
  out.position.y += dy;
  out.position = bounds.clamp(out.position);
  return out;
}

}  // namespace skytalk
