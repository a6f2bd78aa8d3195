#include "congrad/metrics_io.hpp"

#include <cstdio>
#include <stdexcept>

namespace congrad {

namespace {

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

std::string metrics_csv_header(int num_agents) {
  std::string h = "iteration,mean_return,u_star_norm,kkt_margin";
  for (int i = 0; i < num_agents; ++i)
    h += ",g_norm_" + std::to_string(i);
  h += ",actor_surrogate,critic_loss,qp_iters,wall_ms";
  return h;
}

MetricsFileSink::MetricsFileSink(const std::string& path, int num_agents,
                                 const std::string& format, bool timing)
    : out_(path, std::ios::binary),
      num_agents_(num_agents),
      jsonl_(format == "jsonl"),
      timing_(timing) {
  if (!out_)
    throw std::runtime_error("cannot open metrics file '" + path + "'");
  if (format != "csv" && format != "jsonl")
    throw std::invalid_argument("unknown metrics format '" + format + "'");
  if (!jsonl_) {
    out_ << metrics_csv_header(num_agents_) << "\n";
    out_.flush();
  }
}

void MetricsFileSink::write(const IterationMetrics& m) {
  if (static_cast<int>(m.g_norms.size()) != num_agents_)
    throw std::invalid_argument("metrics row has " +
                                std::to_string(m.g_norms.size()) +
                                " gradient norms, expected " +
                                std::to_string(num_agents_));
  const double wall = timing_ ? m.wall_ms : 0.0;
  if (jsonl_) {
    std::string line = "{\"iteration\":" + std::to_string(m.iteration);
    line += ",\"mean_return\":" + fmt(m.mean_return);
    line += ",\"u_star_norm\":" + fmt(m.u_star_norm);
    line += ",\"kkt_margin\":" + fmt(m.kkt_margin);
    line += ",\"g_norms\":[";
    for (int i = 0; i < num_agents_; ++i) {
      if (i) line += ",";
      line += fmt(m.g_norms[i]);
    }
    line += "],\"actor_surrogate\":" + fmt(m.actor_surrogate);
    line += ",\"critic_loss\":" + fmt(m.critic_loss);
    line += ",\"qp_iters\":" + std::to_string(m.qp_iters);
    line += ",\"wall_ms\":" + fmt(wall) + "}";
    out_ << line << "\n";
  } else {
    out_ << m.iteration << "," << fmt(m.mean_return) << ","
         << fmt(m.u_star_norm) << "," << fmt(m.kkt_margin);
    for (int i = 0; i < num_agents_; ++i) out_ << "," << fmt(m.g_norms[i]);
    out_ << "," << fmt(m.actor_surrogate) << "," << fmt(m.critic_loss) << ","
         << m.qp_iters << "," << fmt(wall) << "\n";
  }
  out_.flush();
}

}  // namespace congrad
