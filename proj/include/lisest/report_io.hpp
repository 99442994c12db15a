#ifndef LISEST_REPORT_IO_HPP
#define LISEST_REPORT_IO_HPP

#include <iosfwd>

#include "lisest/model_io.hpp"
#include "lisest/sim.hpp"
#include "lisest/stability.hpp"

namespace lisest {

Json to_json(const StabilityReport& report);
Json to_json(const ConditionReport& report);
Json to_json(const DistributedLmiRow& row);
Json to_json(const SweepReport& report);
Json to_json(const DmreProbe& probe);
Json to_json(const DecayResult& decay);
Json to_json(const BootstrapResult& boot);

/// Human-readable summary table.
void print_summary(std::ostream& os, const StabilityReport& report);
void print_summary(std::ostream& os, const ConditionReport& report);
void print_summary(std::ostream& os, const std::vector<DistributedLmiRow>& rows);
void print_summary(std::ostream& os, const SweepReport& report);

}  // namespace lisest

#endif  // LISEST_REPORT_IO_HPP
