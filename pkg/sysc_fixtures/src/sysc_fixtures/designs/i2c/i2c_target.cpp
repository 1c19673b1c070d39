#include <systemc>
#include <tlm>
#include <tlm_utils/simple_target_socket.h>

#include "i2c_payload.h"

// Bus controller in front of two register targets (an ALU accumulator and a
// plain register cell).  Each transaction advances the protocol one phase:
// idle -> addressing -> ack -> transfer -> idle.
struct i2c_bus : sc_core::sc_module {
    tlm_utils::simple_target_socket<i2c_bus> target_socket;

    i2c_phase_t state;
    bool req_write;
    sc_dt::sc_uint<8> req_wdata;
    i2c_target_t req_target;
    sc_dt::sc_uint<8> alu_acc;
    sc_dt::sc_uint<8> reg_cell;
    bus_stats stats;

    SC_CTOR(i2c_bus)
        : target_socket("target_socket"), state(PHASE_IDLE),
          req_write(false), req_wdata(0), req_target(TARGET_ALU),
          alu_acc(0), reg_cell(0) {
        stats.total = 0;
        stats.nacks = 0;
        target_socket.register_b_transport(this, &i2c_bus::b_transport);
    }

    void b_transport(tlm::tlm_generic_payload& trans, sc_core::sc_time& delay) {
        i2c_request* req = reinterpret_cast<i2c_request*>(trans.get_data_ptr());
        switch (state) {
        case PHASE_IDLE:
            if (req->start) {
                req_write = req->write;
                req_wdata = req->wdata;
                req_target = req->target;
                stats.total = stats.total + 1;
                state = PHASE_ADDRESSING;
            }
            break;
        case PHASE_ADDRESSING: {
            bool valid = (req_target == TARGET_ALU) || (req_target == TARGET_REG);
            req->ack = valid;
            if (!valid) {
                stats.nacks = stats.nacks + 1;
            }
            state = valid ? PHASE_ACK : PHASE_IDLE;
            break;
        }
        case PHASE_ACK:
            state = PHASE_TRANSFER;
            break;
        case PHASE_TRANSFER:
            if (req_write) {
                if (req_target == TARGET_ALU) {
                    alu_acc = req_wdata;
                } else {
                    reg_cell = req_wdata;
                }
            } else {
                req->rdata = (req_target == TARGET_ALU) ? alu_acc : reg_cell;
            }
            state = PHASE_IDLE;
            break;
        }
        req->phase = state;
        trans.set_response_status(tlm::TLM_OK_RESPONSE);
    }
};
