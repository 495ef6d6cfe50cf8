#include "coex/op_model.hpp"

#include <nlohmann/json.hpp>

#include "coex/error.hpp"

namespace coex {

namespace {

void require(bool cond, const std::string& message) {
    if (!cond) throw ContractViolation(message);
}

}  // namespace

LinearOp::LinearOp(std::int64_t length_, std::int64_t c_in_, std::int64_t c_out_)
    : length(length_), c_in(c_in_), c_out(c_out_) {
    require(length >= 1 && c_in >= 1 && c_out >= 1,
            "LinearOp dimensions must be positive");
}

ConvOp::ConvOp(std::int64_t h_in_, std::int64_t w_in_, std::int64_t c_in_, std::int64_t c_out_,
               std::int64_t k_, std::int64_t s_)
    : h_in(h_in_), w_in(w_in_), c_in(c_in_), c_out(c_out_), k(k_), s(s_) {
    require(h_in >= 1 && w_in >= 1 && c_in >= 1 && c_out >= 1,
            "ConvOp dimensions must be positive");
    require(k == 1 || k == 3 || k == 5 || k == 7, "ConvOp kernel size must be one of {1,3,5,7}");
    require(s == 1 || s == 2, "ConvOp stride must be 1 or 2");
    require(h_in >= k && w_in >= k, "ConvOp input extent must be >= kernel size");
}

std::pair<std::int64_t, std::int64_t> output_shape(const ConvOp& op) {
    return {op.h_in / op.s, op.w_in / op.s};
}

std::int64_t c_out_of(const OpDescriptor& op) {
    return std::visit([](const auto& o) { return o.c_out; }, op);
}

std::int64_t flops(const LinearOp& op) {
    return 2 * op.length * op.c_in * op.c_out;
}

std::int64_t flops(const ConvOp& op) {
    const auto [h_out, w_out] = output_shape(op);
    return 2 * h_out * w_out * op.c_out * op.k * op.k * op.c_in;
}

std::int64_t flops(const OpDescriptor& op) {
    return std::visit([](const auto& o) { return flops(o); }, op);
}

namespace {

OpDescriptor with_c_out(const OpDescriptor& op, std::int64_t c_out) {
    if (const auto* lin = std::get_if<LinearOp>(&op)) {
        return LinearOp(lin->length, lin->c_in, c_out);
    }
    const auto& conv = std::get<ConvOp>(op);
    return ConvOp(conv.h_in, conv.w_in, conv.c_in, c_out, conv.k, conv.s);
}

}  // namespace

SplitOps split(const OpDescriptor& op, const ChannelPartition& partition) {
    require(partition.c_cpu >= 0 && partition.c_gpu >= 0,
            "split: channel counts must be non-negative");
    require(partition.c_cpu + partition.c_gpu == c_out_of(op),
            "split: partition must cover all output channels");
    SplitOps result;
    if (partition.c_cpu > 0) result.cpu = with_c_out(op, partition.c_cpu);
    if (partition.c_gpu > 0) result.gpu = with_c_out(op, partition.c_gpu);
    return result;
}

std::string op_to_json(const OpDescriptor& op) {
    nlohmann::ordered_json record;
    if (const auto* lin = std::get_if<LinearOp>(&op)) {
        record["type"] = "linear";
        record["L"] = lin->length;
        record["C_in"] = lin->c_in;
        record["C_out"] = lin->c_out;
    } else {
        const auto& conv = std::get<ConvOp>(op);
        record["type"] = "conv";
        record["C_in"] = conv.c_in;
        record["C_out"] = conv.c_out;
        record["H_in"] = conv.h_in;
        record["W_in"] = conv.w_in;
        record["K"] = conv.k;
        record["S"] = conv.s;
    }
    return record.dump();
}

OpDescriptor op_from_json(const std::string& text) {
    nlohmann::json record;
    try {
        record = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("malformed op record: ") + e.what());
    }
    try {
        const std::string type = record.at("type").get<std::string>();
        if (type == "linear") {
            return LinearOp(record.at("L").get<std::int64_t>(),
                            record.at("C_in").get<std::int64_t>(),
                            record.at("C_out").get<std::int64_t>());
        }
        if (type == "conv") {
            return ConvOp(record.at("H_in").get<std::int64_t>(),
                          record.at("W_in").get<std::int64_t>(),
                          record.at("C_in").get<std::int64_t>(),
                          record.at("C_out").get<std::int64_t>(),
                          record.at("K").get<std::int64_t>(),
                          record.at("S").get<std::int64_t>());
        }
        throw ValidationError("unknown op type: " + type);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("incomplete op record: ") + e.what());
    } catch (const ContractViolation& e) {
        throw ValidationError(std::string("invalid op record: ") + e.what());
    }
}

bool op_equal(const OpDescriptor& a, const OpDescriptor& b) {
    if (a.index() != b.index()) return false;
    if (const auto* la = std::get_if<LinearOp>(&a)) {
        const auto& lb = std::get<LinearOp>(b);
        return la->length == lb.length && la->c_in == lb.c_in && la->c_out == lb.c_out;
    }
    const auto& ca = std::get<ConvOp>(a);
    const auto& cb = std::get<ConvOp>(b);
    return ca.h_in == cb.h_in && ca.w_in == cb.w_in && ca.c_in == cb.c_in &&
           ca.c_out == cb.c_out && ca.k == cb.k && ca.s == cb.s;
}

}  // namespace coex
