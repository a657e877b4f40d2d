#include "toma/replay.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace toma {

namespace {

[[noreturn]] void fail(int line, const std::string& msg) {
  throw std::runtime_error("replay line " + std::to_string(line) + ": " + msg);
}

}  // namespace

ReplayWriter::ReplayWriter(std::ostream& out, const Env& env) : out_(out) {
  out_.precision(17);
  out_ << "toma-replay 1\n";
  env.write_replay_header(out_);
}

void ReplayWriter::add_step(const Env& env, double reward,
                            const std::vector<std::pair<int, int>>& comm) {
  out_ << "step " << reward << " ";
  env.write_replay_state(out_);
  out_ << " c";
  for (const auto& [s, r] : comm) out_ << " " << s << ">" << r;
  out_ << "\n";
}

Replay read_replay(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open replay: " + path);
  Replay rp;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (!header_seen) {
      if (tag != "toma-replay") fail(lineno, "missing toma-replay header");
      int version = 0;
      ls >> version;
      if (version != 1) fail(lineno, "unsupported replay version");
      header_seen = true;
      continue;
    }
    if (tag == "task") {
      ls >> rp.task;
    } else if (tag == "n") {
      ls >> rp.n;
    } else if (tag == "m") {
      ls >> rp.m;
    } else if (tag == "arena") {
      ls >> rp.arena;
    } else if (tag == "sense_radius") {
      ls >> rp.sense_radius;
    } else if (tag == "fov_halfangle") {
      ls >> rp.fov_halfangle;
    } else if (tag == "sensor") {
      Vec2 v;
      ls >> v.x >> v.y;
      rp.sensors.push_back(v);
    } else if (tag == "obstacle") {
      Obstacle o;
      ls >> o.center.x >> o.center.y >> o.radius;
      rp.obstacles.push_back(o);
    } else if (tag == "landmark") {
      Vec2 v;
      ls >> v.x >> v.y;
      rp.landmarks.push_back(v);
    } else if (tag == "step") {
      ReplayStep st;
      if (!(ls >> st.reward)) fail(lineno, "step missing reward");
      std::string mark;
      ls >> mark;
      if (rp.task == "msmtc") {
        if (mark != "y") fail(lineno, "expected yaw block 'y'");
        for (int i = 0; i < rp.n; ++i) {
          double v;
          if (!(ls >> v)) fail(lineno, "truncated yaw block");
          st.agent_state.push_back(v);
        }
        ls >> mark;
        if (mark != "t") fail(lineno, "expected target block 't'");
        for (int q = 0; q < 2 * rp.m; ++q) {
          double v;
          if (!(ls >> v)) fail(lineno, "truncated target block");
          st.target_xy.push_back(v);
        }
      } else if (rp.task == "coopnav") {
        if (mark != "a") fail(lineno, "expected agent block 'a'");
        for (int i = 0; i < 2 * rp.n; ++i) {
          double v;
          if (!(ls >> v)) fail(lineno, "truncated agent block");
          st.agent_state.push_back(v);
        }
      } else {
        fail(lineno, "step before task declaration");
      }
      ls >> mark;
      if (mark != "c") fail(lineno, "expected comm block 'c'");
      std::string edge;
      while (ls >> edge) {
        const auto gt = edge.find('>');
        if (gt == std::string::npos) fail(lineno, "malformed comm edge '" + edge + "'");
        try {
          st.comm.emplace_back(std::stoi(edge.substr(0, gt)), std::stoi(edge.substr(gt + 1)));
        } catch (const std::exception&) {
          fail(lineno, "malformed comm edge '" + edge + "'");
        }
      }
      rp.steps.push_back(std::move(st));
    } else {
      fail(lineno, "unknown record '" + tag + "'");
    }
  }
  if (!header_seen) throw std::runtime_error("replay is empty: " + path);
  if (rp.n <= 0) throw std::runtime_error("replay missing agent count: " + path);
  return rp;
}

}  // namespace toma
