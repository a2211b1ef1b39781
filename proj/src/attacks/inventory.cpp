#include "sxsm/attacks/inventory.hpp"

#include <algorithm>
#include <sstream>

#include <boost/algorithm/string.hpp>

#include "sxsm/scenario/scenario.hpp"

namespace sxsm::attacks {

void UriInventory::add(InventoryEntry entry) {
    auto key = entry.uri.str();
    if (find(key)) throw InventoryError("duplicate inventory entry " + key);
    entries_.push_back(std::move(entry));
}

const InventoryEntry* UriInventory::find(const std::string& uri) const {
    for (const auto& e : entries_)
        if (e.uri.str() == uri) return &e;
    return nullptr;
}

std::vector<InventoryEntry> UriInventory::assigned() const {
    std::vector<InventoryEntry> out;
    std::copy_if(entries_.begin(), entries_.end(), std::back_inserter(out),
                 [](const auto& e) { return sip::is_assigned(e.status); });
    return out;
}

std::vector<InventoryEntry> UriInventory::with_status(sip::UriStatus status) const {
    std::vector<InventoryEntry> out;
    std::copy_if(entries_.begin(), entries_.end(), std::back_inserter(out),
                 [status](const auto& e) { return e.status == status; });
    return out;
}

std::string UriInventory::to_csv() const {
    std::ostringstream out;
    out << "uri,status,probe,timestamp\n";
    for (const auto& e : entries_)
        out << e.uri.str() << ',' << sip::to_string(e.status) << ',' << e.probe << ',' << e.observed_at << '\n';
    return out.str();
}

UriInventory UriInventory::from_csv(std::string_view text) {
    UriInventory inv;
    std::vector<std::string> lines;
    boost::split(lines, text, boost::is_any_of("\n"));
    bool header = true;
    for (auto line : lines) {
        boost::trim(line);
        if (line.empty()) continue;
        if (header) {
            header = false;
            if (line.rfind("uri,", 0) == 0) continue;
        }
        std::vector<std::string> cols;
        boost::split(cols, line, boost::is_any_of(","));
        if (cols.size() != 4) throw InventoryError("inventory row needs 4 columns: " + line);
        InventoryEntry e;
        try {
            e.uri = sip::SipUri::parse(cols[0]);
            e.status = sip::uri_status_from_string(cols[1]);
            e.observed_at = std::stoll(cols[3]);
        } catch (const std::exception& ex) {
            throw InventoryError("bad inventory row '" + line + "': " + ex.what());
        }
        e.probe = cols[2];
        inv.add(std::move(e));
    }
    return inv;
}

void UriInventory::save(const std::filesystem::path& path) const { scenario::write_file(path, to_csv()); }

UriInventory UriInventory::load(const std::filesystem::path& path) { return from_csv(scenario::read_file(path)); }

bool is_stale(const InventoryEntry& entry, TimeMs now) { return now - entry.observed_at > kTemporaryUriLifetimeMs; }

}  // namespace sxsm::attacks
