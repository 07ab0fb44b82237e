#include "mlsim/trace.hpp"

#include <json.hpp>

#include <ostream>
#include <sstream>

namespace mlsim
{
    void Trace::write_jsonl(std::ostream &os) const
    {
        for (const auto &ev : m_events)
        {
            nlohmann::ordered_json line;
            line["step"] = ev.step;
            line["rank"] = ev.rank;
            line["op"] = ev.op;
            line["peer"] = ev.peer;
            line["iter"] = ev.iter;
            line["phase"] = ev.phase;
            line["outcome"] = ev.outcome;
            os << line.dump() << '\n';
        }
    }

    std::string Trace::to_jsonl() const
    {
        std::ostringstream os;
        write_jsonl(os);
        return os.str();
    }
}
