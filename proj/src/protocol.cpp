#include "psnap/protocol.hpp"

#include <array>
#include <utility>

namespace psnap {

Category classify(Kind kind, bool forwarded) {
    switch (kind) {
        case Kind::App:
            return Category::Application;
        case Kind::Marker:
        case Kind::RbMarker:
            return Category::Marker;
        case Kind::MyDS:
        case Kind::Out:
        case Kind::Fin:
        case Kind::RbMyDS:
        case Kind::RbOut:
        case Kind::RbFin:
            return Category::Normal;
        case Kind::Link:
        case Kind::Ack:
        case Kind::Deny:
        case Kind::Accept:
            return Category::Collision;
        case Kind::NewInit:
        case Kind::CssCombine:
        case Kind::CssCompInit:
        case Kind::CssInitInfo:
            return forwarded ? Category::InitiatorNetwork : Category::Collision;
        case Kind::CssDSinfo:
            return forwarded ? Category::InitiatorNetwork : Category::Normal;
        case Kind::Check:
        case Kind::LocalTerm:
        case Kind::GlobalTerm:
            return Category::InitiatorNetwork;
    }
    return Category::Normal;  // unreachable
}

namespace {

constexpr std::array<std::pair<Kind, std::string_view>, 21> kKindNames{{
    {Kind::App, "App"},
    {Kind::Marker, "Marker"},
    {Kind::MyDS, "MyDS"},
    {Kind::Out, "Out"},
    {Kind::Fin, "Fin"},
    {Kind::NewInit, "NewInit"},
    {Kind::Link, "Link"},
    {Kind::Ack, "Ack"},
    {Kind::Deny, "Deny"},
    {Kind::Accept, "Accept"},
    {Kind::Check, "Check"},
    {Kind::LocalTerm, "LocalTerm"},
    {Kind::GlobalTerm, "GlobalTerm"},
    {Kind::RbMarker, "RbMarker"},
    {Kind::RbMyDS, "RbMyDS"},
    {Kind::RbOut, "RbOut"},
    {Kind::RbFin, "RbFin"},
    {Kind::CssDSinfo, "CssDSinfo"},
    {Kind::CssCombine, "CssCombine"},
    {Kind::CssCompInit, "CssCompInit"},
    {Kind::CssInitInfo, "CssInitInfo"},
}};

}  // namespace

std::string_view kind_name(Kind k) {
    for (const auto& [kind, name] : kKindNames)
        if (kind == k) return name;
    return "?";
}

std::optional<Kind> kind_from_name(std::string_view name) {
    for (const auto& [kind, n] : kKindNames)
        if (n == name) return kind;
    return std::nullopt;
}

std::string_view category_name(Category c) {
    switch (c) {
        case Category::Marker: return "marker";
        case Category::Normal: return "normal";
        case Category::Collision: return "collision";
        case Category::InitiatorNetwork: return "initnet";
        case Category::Application: return "application";
    }
    return "?";
}

}  // namespace psnap
