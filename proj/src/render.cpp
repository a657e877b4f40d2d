#include "toma/render.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace toma {

namespace {

constexpr double kCanvas = 640.0;
constexpr double kMargin = 20.0;

struct Mapper {
  double arena;
  double sx(double x) const { return kMargin + (kCanvas - 2 * kMargin) * (x / arena); }
  double sy(double y) const { return kMargin + (kCanvas - 2 * kMargin) * (1.0 - y / arena); }
  double len(double d) const { return (kCanvas - 2 * kMargin) * (d / arena); }
};

void draw_arrow(std::ostream& out, const Mapper& mp, Vec2 from, Vec2 to) {
  const double x1 = mp.sx(from.x), y1 = mp.sy(from.y);
  const double x2 = mp.sx(to.x), y2 = mp.sy(to.y);
  out << "<line x1='" << x1 << "' y1='" << y1 << "' x2='" << x2 << "' y2='" << y2
      << "' stroke='#d33' stroke-width='2' marker-end='url(#arrow)'/>\n";
}

void render_frame(const Replay& rp, const ReplayStep& st, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write frame: " + path);
  Mapper mp{rp.arena};
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kCanvas << "' height='" << kCanvas
      << "' viewBox='0 0 " << kCanvas << " " << kCanvas << "'>\n";
  out << "<defs><marker id='arrow' markerWidth='8' markerHeight='8' refX='6' refY='3' "
         "orient='auto'><path d='M0,0 L6,3 L0,6 z' fill='#d33'/></marker></defs>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<rect x='" << mp.sx(0) << "' y='" << mp.sy(rp.arena) << "' width='" << mp.len(rp.arena)
      << "' height='" << mp.len(rp.arena) << "' fill='none' stroke='#333'/>\n";

  for (const auto& o : rp.obstacles) {
    out << "<circle cx='" << mp.sx(o.center.x) << "' cy='" << mp.sy(o.center.y) << "' r='"
        << mp.len(o.radius) << "' fill='#aaa' stroke='#888'/>\n";
  }

  if (rp.task == "msmtc") {
    for (int i = 0; i < rp.n; ++i) {
      const Vec2 p = rp.sensors[i];
      const double yaw = st.agent_state[i];
      const double r = mp.len(rp.sense_radius);
      const double a0 = yaw - rp.fov_halfangle;
      const double a1 = yaw + rp.fov_halfangle;
      const double x0 = mp.sx(p.x) + r * std::cos(a0), y0 = mp.sy(p.y) - r * std::sin(a0);
      const double x1 = mp.sx(p.x) + r * std::cos(a1), y1 = mp.sy(p.y) - r * std::sin(a1);
      const int large = (2 * rp.fov_halfangle > kPi) ? 1 : 0;
      out << "<path d='M" << mp.sx(p.x) << "," << mp.sy(p.y) << " L" << x0 << "," << y0 << " A"
          << r << "," << r << " 0 " << large << " 0 " << x1 << "," << y1
          << " Z' fill='#4a90d9' fill-opacity='0.15' stroke='#4a90d9' stroke-opacity='0.5'/>\n";
      out << "<circle cx='" << mp.sx(p.x) << "' cy='" << mp.sy(p.y)
          << "' r='6' fill='#1c5d99'/>\n";
      out << "<text x='" << mp.sx(p.x) + 8 << "' y='" << mp.sy(p.y) - 8
          << "' font-size='12' fill='#1c5d99'>" << i << "</text>\n";
    }
    for (int q = 0; q < rp.m; ++q) {
      const double tx = st.target_xy[2 * q], ty = st.target_xy[2 * q + 1];
      out << "<circle cx='" << mp.sx(tx) << "' cy='" << mp.sy(ty)
          << "' r='5' fill='#e8882d'/>\n";
      out << "<text x='" << mp.sx(tx) + 6 << "' y='" << mp.sy(ty) + 4
          << "' font-size='11' fill='#e8882d'>" << q << "</text>\n";
    }
    for (const auto& [s, r] : st.comm) draw_arrow(out, mp, rp.sensors[s], rp.sensors[r]);
  } else {
    for (int q = 0; q < static_cast<int>(rp.landmarks.size()); ++q) {
      const Vec2 lm = rp.landmarks[q];
      out << "<rect x='" << mp.sx(lm.x) - 5 << "' y='" << mp.sy(lm.y) - 5
          << "' width='10' height='10' fill='#3c9d4e'/>\n";
    }
    std::vector<Vec2> agents(rp.n);
    for (int i = 0; i < rp.n; ++i) {
      agents[i] = {st.agent_state[2 * i], st.agent_state[2 * i + 1]};
      out << "<circle cx='" << mp.sx(agents[i].x) << "' cy='" << mp.sy(agents[i].y)
          << "' r='6' fill='#1c5d99'/>\n";
    }
    for (const auto& [s, r] : st.comm) draw_arrow(out, mp, agents[s], agents[r]);
  }

  out << "<text x='" << kMargin << "' y='" << kCanvas - 4 << "' font-size='12' fill='#333'>reward "
      << st.reward << "</text>\n";
  out << "</svg>\n";
}

}  // namespace

int render_replay(const Replay& replay, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::ofstream index(out_dir + "/index.txt");
  if (!index) throw std::runtime_error("cannot write index: " + out_dir);
  int count = 0;
  for (const auto& st : replay.steps) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04d.svg", count);
    render_frame(replay, st, out_dir + "/" + name);
    index << name << "\n";
    ++count;
  }
  return count;
}

}  // namespace toma
