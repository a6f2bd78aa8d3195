#pragma once

#include <fstream>
#include <string>

#include "congrad/trainer.hpp"

namespace congrad {

// File-backed metrics writer. Values are printed with %.17g so parsing the
// file back recovers the exact doubles, and every row is flushed as soon as
// it is written. When timing is off, wall_ms is written as 0 so files from
// repeated runs compare byte for byte.
class MetricsFileSink : public MetricsSink {
 public:
  // format: "csv" (fixed column order, one header line) or "jsonl"
  MetricsFileSink(const std::string& path, int num_agents,
                  const std::string& format, bool timing);

  void write(const IterationMetrics& m) override;

 private:
  std::ofstream out_;
  int num_agents_ = 0;
  bool jsonl_ = false;
  bool timing_ = false;
};

std::string metrics_csv_header(int num_agents);

}  // namespace congrad
