#ifndef DMAC_REPORT_JSON_HPP
#define DMAC_REPORT_JSON_HPP

#include "dmac/exponents.hpp"
#include "dmac/gep.hpp"
#include "dmac/infotheory.hpp"
#include "dmac/io.hpp"
#include "dmac/simulator.hpp"

namespace dmac::io {

// JSON views of the result structs, shared by the command line tool and
// the python bindings so both emit the same shapes.

json verdict_to_json(const RegionVerdict& verdict);

json exponent_report_to_json(const ExponentReport& report);
ExponentReport exponent_report_from_json(const json& j);

json gep_report_to_json(const GepBoundReport& report);
json partition_result_to_json(const SingleUserGepBound& result);

// The policy the run used is attached by the caller; the report struct
// does not carry it.
json sim_report_to_json(const SimulationReport& report);

}  // namespace dmac::io

#endif
